#ifndef SLP_REAL_LIFT_HPP
#define SLP_REAL_LIFT_HPP

#include <complex>
#include <vector>

#include <Eigen/Core>

namespace slp {

/// Real stacking of a complex matrix: [[Re, -Im], [Im, Re]]. The lift is a
/// ring homomorphism, so lifted products equal lifted complex products and
/// all norms are preserved.
inline Eigen::MatrixXd lift_channel(const Eigen::MatrixXcd& hc) {
  const Eigen::Index r = hc.rows(), c = hc.cols();
  Eigen::MatrixXd h(2 * r, 2 * c);
  h.topLeftCorner(r, c) = hc.real();
  h.topRightCorner(r, c) = -hc.imag();
  h.bottomLeftCorner(r, c) = hc.imag();
  h.bottomRightCorner(r, c) = hc.real();
  return h;
}

inline Eigen::VectorXd lift_vector(const Eigen::VectorXcd& v) {
  Eigen::VectorXd x(2 * v.size());
  x.head(v.size()) = v.real();
  x.tail(v.size()) = v.imag();
  return x;
}

inline Eigen::VectorXcd unlift_vector(const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size() / 2;
  Eigen::VectorXcd v(n);
  v.real() = x.head(n);
  v.imag() = x.tail(n);
  return v;
}

/// Per-user channel-uncertainty operator. v_bar = diag(m) V_D^H maps a
/// transmit vector to the per-grid-bin interference amplitudes; e = V^T V is
/// the real Gram actually consumed by the precoders. e is assembled from the
/// complex Gram so it is symmetric by construction.
struct UncertaintyOperator {
  Eigen::MatrixXcd v_bar;  // F_vh N x N
  Eigen::MatrixXd v_real;  // 2 F_vh N x 2N
  Eigen::MatrixXd e;       // 2N x 2N
};

inline UncertaintyOperator build_uncertainty(const Eigen::VectorXd& mask,
                                             const Eigen::MatrixXcd& dft_grid) {
  UncertaintyOperator op;
  op.v_bar = mask.asDiagonal() * dft_grid.adjoint();
  op.v_real = lift_channel(op.v_bar);
  // Complex Gram V_D diag(m^2) V_D^H; symmetrize so the lift is exactly
  // symmetric despite rounding in the triple product.
  Eigen::MatrixXcd gram = dft_grid * mask.array().square().matrix().asDiagonal() *
                          dft_grid.adjoint();
  gram = 0.5 * (gram + gram.adjoint()).eval();
  op.e = lift_channel(gram);
  return op;
}

/// Trace-matching spherical stand-in for e: Ê = scale * I with
/// scale = ||m||^2 / N, so tr(Ê) = 2 ||m||^2 like the full Gram.
struct DiagonalApprox {
  double scale = 0.0;
  static DiagonalApprox from_mask(const Eigen::VectorXd& mask, int n_antennas) {
    return {mask.squaredNorm() / n_antennas};
  }
};

/// Row-dominance summary of an uncertainty Gram.
struct DominanceReport {
  double max_offdiag_ratio = 0.0;  // max over rows of max_j |e_nj| / e_nn
  double offdiag_mass = 0.0;       // Frobenius mass of off-diagonal over total
  bool dominant = true;            // e_nn >= |e_nj| for all j != n
};

inline DominanceReport diagonal_dominance_report(const Eigen::MatrixXd& e) {
  DominanceReport rep;
  const Eigen::Index n = e.rows();
  double off2 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double diag = e(i, i);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double a = std::abs(e(i, j));
      off2 += a * a;
      if (diag > 0.0) rep.max_offdiag_ratio = std::max(rep.max_offdiag_ratio, a / diag);
      if (a > diag + 1e-12 * std::max(1.0, diag)) rep.dominant = false;
    }
  }
  const double total2 = e.squaredNorm();
  rep.offdiag_mass = total2 > 0.0 ? std::sqrt(off2 / total2) : 0.0;
  return rep;
}

}  // namespace slp

#endif  // SLP_REAL_LIFT_HPP
