#ifndef SLP_CIR_GEOMETRY_HPP
#define SLP_CIR_GEOMETRY_HPP

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Dense>

namespace slp {

using cd = std::complex<double>;

/// M-PSK constellation, point m = exp(i 2 pi m / M). Point 0 sits at 1+0i;
/// all constructive-interference geometry is rotation-covariant, so the
/// absolute rotation is a convention only.
struct PskConstellation {
  int order = 0;
  Eigen::VectorXcd points;
};

inline PskConstellation psk_constellation(int order) {
  if (order < 4 || (order & (order - 1)) != 0)
    throw std::invalid_argument("psk_constellation: order must be a power of two >= 4");
  PskConstellation c;
  c.order = order;
  c.points.resize(order);
  for (int m = 0; m < order; ++m)
    c.points(m) = std::polar(1.0, 2.0 * M_PI * m / order);
  return c;
}

/// Edge directions of the constructive-interference cone anchored at s.
/// Both run parallel to the decision boundaries of s; mu is the one with a
/// nonzero real part (swapped if needed) so that the stacked boundary matrix
/// stays invertible through its Schur complement.
struct CirBoundary {
  cd mu;
  cd nu;
};

inline CirBoundary cir_boundaries(cd s, int order) {
  const double phi = std::arg(s);
  const double half = M_PI / order;
  cd a = std::polar(1.0, phi + half);
  cd b = std::polar(1.0, phi - half);
  if (std::abs(a.real()) < 1e-12) std::swap(a, b);
  return {a, b};
}

/// Membership test for the CIR cone: z = s + d_mu mu + d_nu nu with both
/// coefficients >= -tol; solves the 2x2 real system.
inline bool in_cir(cd z, cd s, const CirBoundary& b, double tol = 1e-9) {
  const double det = b.mu.real() * b.nu.imag() - b.mu.imag() * b.nu.real();
  const cd r = z - s;
  const double d_mu = (r.real() * b.nu.imag() - r.imag() * b.nu.real()) / det;
  const double d_nu = (b.mu.real() * r.imag() - b.mu.imag() * r.real()) / det;
  return d_mu >= -tol && d_nu >= -tol;
}

/// Stacked boundary matrix Lambda = [[M_R, N_R], [M_I, N_I]] with diagonal
/// blocks diag(Re mu_k), diag(Re nu_k), diag(Im mu_k), diag(Im nu_k), and its
/// inverse computed through the Schur complement of M_R (all blocks diagonal,
/// so the inverse costs O(K)).
struct LambdaMatrix {
  Eigen::MatrixXd lambda;
  Eigen::MatrixXd inverse;
};

inline LambdaMatrix build_lambda(const Eigen::VectorXcd& symbols, int order) {
  const int k_users = static_cast<int>(symbols.size());
  Eigen::VectorXd mr(k_users), mi(k_users), nr(k_users), ni(k_users);
  for (int k = 0; k < k_users; ++k) {
    CirBoundary b = cir_boundaries(symbols(k), order);
    if (std::abs(b.mu.real()) < 1e-12)
      throw std::logic_error("build_lambda: mu has zero real part after swap");
    mr(k) = b.mu.real();
    mi(k) = b.mu.imag();
    nr(k) = b.nu.real();
    ni(k) = b.nu.imag();
  }
  LambdaMatrix out;
  out.lambda = Eigen::MatrixXd::Zero(2 * k_users, 2 * k_users);
  out.inverse = Eigen::MatrixXd::Zero(2 * k_users, 2 * k_users);
  // Schur complement of M_R: S = N_I - M_I M_R^{-1} N_R (diagonal).
  for (int k = 0; k < k_users; ++k) {
    const double s = ni(k) - mi(k) * nr(k) / mr(k);
    const double a = 1.0 / mr(k) + nr(k) * mi(k) / (mr(k) * mr(k) * s);
    out.lambda(k, k) = mr(k);
    out.lambda(k, k_users + k) = nr(k);
    out.lambda(k_users + k, k) = mi(k);
    out.lambda(k_users + k, k_users + k) = ni(k);
    out.inverse(k, k) = a;
    out.inverse(k, k_users + k) = -nr(k) / (mr(k) * s);
    out.inverse(k_users + k, k) = -mi(k) / (mr(k) * s);
    out.inverse(k_users + k, k_users + k) = 1.0 / s;
  }
  return out;
}

/// Phase-sector demodulation; sector m covers phases within pi/M of point m.
/// Ties on a sector boundary go to the lower index; y = 0 maps to index 0.
inline int demodulate(cd y, int order) {
  if (y == cd(0.0, 0.0)) return 0;
  double q = std::arg(y) * order / (2.0 * M_PI);  // (-M/2, M/2]
  // Exact sector boundaries q = m + 0.5 belong to the lower index; the wrap
  // boundary q = -0.5 is shared by sectors M-1 and 0 and goes to 0.
  if (q >= -0.5 && q <= 0.5) return 0;
  if (q < -0.5) q += order;
  int m = static_cast<int>(std::ceil(q - 0.5));
  return m == order ? 0 : m;
}

/// Per-symbol CIR data: the chosen constellation points, their boundary
/// directions, and the stacked boundary matrix.
struct CirSpec {
  int order = 0;
  Eigen::VectorXcd symbols;           // K complex points
  std::vector<CirBoundary> bounds;    // K
  LambdaMatrix lambda;                // 2K x 2K
};

inline CirSpec make_cir_spec(const Eigen::VectorXcd& symbols, int order) {
  CirSpec spec;
  spec.order = order;
  spec.symbols = symbols;
  spec.bounds.reserve(symbols.size());
  for (Eigen::Index k = 0; k < symbols.size(); ++k)
    spec.bounds.push_back(cir_boundaries(symbols(k), order));
  spec.lambda = build_lambda(symbols, order);
  return spec;
}

}  // namespace slp

#endif  // SLP_CIR_GEOMETRY_HPP
