#ifndef SLP_NNLS_HPP
#define SLP_NNLS_HPP

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Dense>

namespace slp {

/// Error thrown by iterative solvers on budget exhaustion; carries the best
/// iterate so callers can inspect how close the solve got.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, Eigen::VectorXd best, double residual)
      : std::runtime_error(what), best_iterate(std::move(best)), kkt_residual(residual) {}
  Eigen::VectorXd best_iterate;
  double kkt_residual = 0.0;
};

/// min ||c δ - d||^2 subject to δ >= 0.
struct NnlsProblem {
  Eigen::MatrixXd c;
  Eigen::VectorXd d;
};

struct NnlsResult {
  Eigen::VectorXd delta;
  double objective = 0.0;      // ||c δ - d||^2
  double kkt_residual = 0.0;   // max(+gradient on zero set, |gradient| on positive set)
  int iterations = 0;
};

/// Lawson-Hanson active set with single-index moves. Ties in the entering
/// dual pick the smallest index, which makes degenerate (rank-deficient)
/// problems deterministic.
inline NnlsResult solve_nnls(const NnlsProblem& problem, double tol = 1e-9,
                             int max_iter = 0,
                             std::vector<double>* objective_trace = nullptr) {
  const Eigen::Index n = problem.c.cols();
  const Eigen::Index m = problem.c.rows();
  if (problem.d.size() != m) throw std::invalid_argument("solve_nnls: dimension mismatch");
  if (!(tol > 0.0)) throw std::invalid_argument("solve_nnls: tol must be positive");
  if (max_iter <= 0) max_iter = 3 * static_cast<int>(n) + 30;

  Eigen::VectorXd delta = Eigen::VectorXd::Zero(n);
  std::vector<bool> passive(n, false);
  std::vector<Eigen::Index> pset;

  auto ls_on_passive = [&](Eigen::VectorXd& z) {
    Eigen::MatrixXd cp(m, pset.size());
    for (size_t j = 0; j < pset.size(); ++j) cp.col(j) = problem.c.col(pset[j]);
    Eigen::VectorXd zp = cp.colPivHouseholderQr().solve(problem.d);
    z.setZero();
    for (size_t j = 0; j < pset.size(); ++j) z(pset[j]) = zp(j);
  };

  int iter = 0;
  const double grad_scale = std::max(1.0, problem.d.norm() * problem.c.norm());
  while (iter < max_iter) {
    if (objective_trace)
      objective_trace->push_back((problem.d - problem.c * delta).squaredNorm());
    Eigen::VectorXd w = problem.c.transpose() * (problem.d - problem.c * delta);
    Eigen::Index enter = -1;
    double best = tol * grad_scale;
    for (Eigen::Index j = 0; j < n; ++j)
      if (!passive[j] && w(j) > best) {
        best = w(j);
        enter = j;
      }
    if (enter < 0) break;  // KKT satisfied
    passive[enter] = true;
    pset.push_back(enter);

    Eigen::VectorXd z(n);
    for (;;) {
      ++iter;
      ls_on_passive(z);
      bool all_pos = true;
      for (Eigen::Index j : pset)
        if (z(j) <= 0.0) { all_pos = false; break; }
      if (all_pos) {
        delta = z;
        break;
      }
      // Step toward z until the first passive coordinate hits zero.
      double alpha = 1.0;
      for (Eigen::Index j : pset)
        if (z(j) <= 0.0) alpha = std::min(alpha, delta(j) / (delta(j) - z(j)));
      delta += alpha * (z - delta);
      for (size_t p = 0; p < pset.size();) {
        Eigen::Index j = pset[p];
        if (delta(j) <= tol * std::max(1.0, z.cwiseAbs().maxCoeff())) {
          delta(j) = 0.0;
          passive[j] = false;
          pset.erase(pset.begin() + p);
        } else {
          ++p;
        }
      }
      if (pset.empty()) {
        delta.setZero();
        break;
      }
      if (iter >= max_iter) break;
    }
  }

  Eigen::VectorXd resid = problem.d - problem.c * delta;
  Eigen::VectorXd w = problem.c.transpose() * resid;
  double kkt = 0.0;
  for (Eigen::Index j = 0; j < n; ++j)
    kkt = std::max(kkt, passive[j] ? std::abs(w(j)) : std::max(0.0, w(j)));

  if (iter >= max_iter && kkt > tol * grad_scale)
    throw SolverError("solve_nnls: iteration budget exhausted", delta, kkt);

  NnlsResult out;
  out.delta = std::move(delta);
  out.objective = resid.squaredNorm();
  out.kkt_residual = kkt;
  out.iterations = iter;
  return out;
}

/// Gram R_A = A^T A with the Frobenius mass of its off-diagonal part.
struct GramDiagnostic {
  Eigen::MatrixXd r_a;
  double offdiag_ratio = 0.0;
};

inline double offdiag_frobenius_ratio(const Eigen::MatrixXd& m) {
  double off2 = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (i != j) off2 += m(i, j) * m(i, j);
  const double total2 = off2 + m.diagonal().squaredNorm();
  return total2 > 0.0 ? std::sqrt(off2 / total2) : 0.0;
}

inline GramDiagnostic gram_diagnostic(const Eigen::MatrixXd& a) {
  GramDiagnostic g;
  g.r_a = a.transpose() * a;
  g.offdiag_ratio = offdiag_frobenius_ratio(g.r_a);
  return g;
}

/// Diagonal-Gram shortcut: for the CIR-structured problem
/// min_{δ>=0} ||A (s + Λ δ)||^2, δ = 0 is optimal whenever A^T A is diagonal.
/// Returns δ = 0 if the Gram is diagonal within the threshold, otherwise
/// signals "no shortcut". The asymptotic (N >> K) approximation is invoked
/// explicitly by the low-complexity precoders, never auto-detected here.
inline std::optional<Eigen::VectorXd> lemma1_shortcut(const Eigen::VectorXd& s,
                                                      const Eigen::MatrixXd& a,
                                                      double threshold = 1e-10) {
  GramDiagnostic g = gram_diagnostic(a);
  if (g.offdiag_ratio < threshold)
    return Eigen::VectorXd::Zero(s.size());
  return std::nullopt;
}

}  // namespace slp

#endif  // SLP_NNLS_HPP
