#ifndef SLP_PRECODERS_HPP
#define SLP_PRECODERS_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Dense>

#include "slp/cir_geometry.hpp"
#include "slp/maxmin.hpp"
#include "slp/nnls.hpp"

namespace slp {

/// Everything a symbol-level precoder sees for one symbol slot. The channel
/// is always the lifted mean h_bar = alpha h_u, never the true aged channel.
/// e_grams/mask_sq_norms describe the per-user uncertainty; h_pinv and h_gram
/// are optional per-slot caches (H^T (H H^T)^{-1} and H H^T).
struct SlpInput {
  const Eigen::MatrixXd* h = nullptr;  // 2K x 2N
  const CirSpec* cir = nullptr;
  Eigen::VectorXd beta;                                   // K
  const std::vector<Eigen::MatrixXd>* e_grams = nullptr;  // K of 2N x 2N
  Eigen::VectorXd mask_sq_norms;                          // K, ||m_k||^2
  double sigma2 = 0.0;
  double p_t = 1.0;
  const Eigen::MatrixXd* h_pinv = nullptr;  // 2N x 2K
  const Eigen::MatrixXd* h_gram = nullptr;  // 2K x 2K

  int n_users() const { return static_cast<int>(beta.size()); }
  int nx() const { return static_cast<int>(h->cols()); }
  Eigen::VectorXd lifted_symbols() const {
    const Eigen::VectorXcd& sc = cir->symbols;
    Eigen::VectorXd s(2 * sc.size());
    s.head(sc.size()) = sc.real();
    s.tail(sc.size()) = sc.imag();
    return s;
  }
};

struct SlpDiagnostics {
  double objective = 0.0;
  int iterations = 0;
  Eigen::VectorXd delta;              // CIR relaxation, empty when not applicable
  Eigen::VectorXd target;             // real 2K expected signal for the MSE metric
  std::vector<double> trace;          // per-iteration objective (MMSE family)
  std::vector<GdTraceRow> gd_trace;   // Dinkelbach trace (SINR-balancing family)
  Eigen::VectorXd psi;                // final per-user weights (MMSE family)
  Eigen::VectorXd psi_for_filter;     // weights the final filter was built with
  double eta = 0.0;
};

struct SlpOutput {
  Eigen::VectorXd x;      // 2N, ||x||^2 <= P_T (1 + 1e-8)
  Eigen::VectorXd gamma;  // K, positive rescaling factors
  SlpDiagnostics diag;
};

namespace detail {

inline Eigen::MatrixXd pinv_rows(const Eigen::MatrixXd& h) {
  Eigen::LLT<Eigen::MatrixXd> llt(h * h.transpose());
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("precoder: rank-deficient channel");
  return h.transpose() * llt.solve(Eigen::MatrixXd::Identity(h.rows(), h.rows()));
}

inline Eigen::VectorXd cis_target(const SlpInput& in, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& gamma) {
  const int k_users = in.n_users();
  Eigen::VectorXd hx = (*in.h) * x;
  Eigen::VectorXd t(2 * k_users);
  for (int k = 0; k < k_users; ++k) {
    t(k) = hx(k) / gamma(k);
    t(k_users + k) = hx(k_users + k) / gamma(k);
  }
  return t;
}

}  // namespace detail

/// Zero-forcing with symbol-level power normalization: x ∝ H† s scaled to
/// ||x||^2 = P_T, common rescaling factor.
inline SlpOutput zf_precode(const SlpInput& in) {
  Eigen::VectorXd s = in.lifted_symbols();
  Eigen::VectorXd v = in.h_pinv ? Eigen::VectorXd((*in.h_pinv) * s)
                                : Eigen::VectorXd(detail::pinv_rows(*in.h) * s);
  double scale = std::sqrt(in.p_t) / v.norm();
  SlpOutput out;
  out.x = scale * v;
  out.gamma = Eigen::VectorXd::Constant(in.n_users(), scale);
  out.diag.target = s;
  return out;
}

/// Regularized variant with the standard K sigma^2 / P_T loading.
inline SlpOutput mmse_precode(const SlpInput& in) {
  const Eigen::MatrixXd& h = *in.h;
  Eigen::VectorXd s = in.lifted_symbols();
  Eigen::MatrixXd gram = in.h_gram ? *in.h_gram : Eigen::MatrixXd(h * h.transpose());
  gram.diagonal().array() += in.n_users() * in.sigma2 / in.p_t;
  Eigen::VectorXd v = h.transpose() * gram.llt().solve(s);
  double scale = std::sqrt(in.p_t) / v.norm();
  SlpOutput out;
  out.x = scale * v;
  out.gamma = Eigen::VectorXd::Constant(in.n_users(), scale);
  out.diag.target = s;
  return out;
}

namespace detail {

inline SlpOutput run_maxmin(const SlpInput& in, bool robust, const MaxMinOptions& opt) {
  MmfpProblem prob;
  prob.h = in.h;
  prob.lambda_inv = &in.cir->lambda.inverse;
  prob.s = in.lifted_symbols();
  prob.beta = robust ? in.beta : Eigen::VectorXd::Zero(in.n_users());
  prob.e_grams = robust ? in.e_grams : nullptr;
  prob.sigma2 = in.sigma2;
  prob.p_t = in.p_t;
  GdResult gd = solve_gd(prob, opt);
  SlpOutput out;
  out.x = gd.x;
  out.gamma = gd.gamma;
  out.diag.objective = gd.lambda * gd.lambda;  // achieved min_k Gamma_k bound
  out.diag.iterations = gd.outer_iters;
  out.diag.gd_trace = gd.trace;
  out.diag.target = cis_target(in, out.x, out.gamma);
  return out;
}

}  // namespace detail

/// Conventional SINR balancing (perfect-CSI objective): the robust solver
/// with the uncertainty terms removed.
inline SlpOutput cisb_precode(const SlpInput& in, const MaxMinOptions& opt = {}) {
  return detail::run_maxmin(in, false, opt);
}

/// Robust SINR balancing via Generalized Dinkelbach.
inline SlpOutput cisb_r_precode(const SlpInput& in, const MaxMinOptions& opt = {}) {
  return detail::run_maxmin(in, true, opt);
}

namespace detail {

struct ClosedFormParts {
  Eigen::VectorXd tau;      // K
  Eigen::VectorXd theta_s;  // Theta * s (2K)
  Eigen::MatrixXd pinv;     // 2N x 2K (borrowed or computed)
};

inline ClosedFormParts closed_form_parts(const SlpInput& in) {
  const int k_users = in.n_users();
  const double n_antennas = in.nx() / 2.0;
  ClosedFormParts parts;
  parts.tau.resize(k_users);
  for (int k = 0; k < k_users; ++k)
    parts.tau(k) = std::sqrt(in.beta(k) * in.beta(k) * in.mask_sq_norms(k) * in.p_t / n_antennas +
                             in.sigma2);
  Eigen::VectorXd s = in.lifted_symbols();
  parts.theta_s.resize(2 * k_users);
  for (int k = 0; k < k_users; ++k) {
    parts.theta_s(k) = parts.tau(k) * s(k);
    parts.theta_s(k_users + k) = parts.tau(k) * s(k_users + k);
  }
  parts.pinv = in.h_pinv ? *in.h_pinv : pinv_rows(*in.h);
  return parts;
}

inline SlpOutput closed_form_finish(const SlpInput& in, const ClosedFormParts& parts,
                                    const Eigen::VectorXd& delta) {
  const int k_users = in.n_users();
  Eigen::VectorXd st = in.lifted_symbols();
  if (delta.size() > 0) st += in.cir->lambda.lambda * delta;
  Eigen::VectorXd theta_st(2 * k_users);
  for (int k = 0; k < k_users; ++k) {
    theta_st(k) = parts.tau(k) * st(k);
    theta_st(k_users + k) = parts.tau(k) * st(k_users + k);
  }
  Eigen::VectorXd v = parts.pinv * theta_st;
  double scale = std::sqrt(in.p_t) / v.norm();
  SlpOutput out;
  out.x = scale * v;
  out.gamma = scale * parts.tau;
  out.diag.delta = delta;
  out.diag.objective = scale * scale;  // min_k gamma_k^2 / tau_k^2
  out.diag.target = cis_target(in, out.x, out.gamma);
  return out;
}

}  // namespace detail

/// Closed-form robust SINR-balancing precoder: tau-weighted pseudo-inverse
/// direction scaled to the power budget, with the CIR relaxation pinned to
/// zero (the N >> K regime where the relaxation is optimal anyway).
inline SlpOutput cisb_rlc_precode(const SlpInput& in) {
  return detail::closed_form_finish(in, detail::closed_form_parts(in), Eigen::VectorXd());
}

/// Exact variant of the closed form: solves the NNLS program
/// min_{delta >= 0} || sqrt(N) H† Theta (s + Lambda delta) ||^2 before
/// applying the same closed-form scaling.
inline SlpOutput closed_form_with_nnls(const SlpInput& in) {
  detail::ClosedFormParts parts = detail::closed_form_parts(in);
  const int k_users = in.n_users();
  const double root_n = std::sqrt(in.nx() / 2.0);
  // sqrt(N) H† Theta as an operator on (s + Lambda delta).
  Eigen::MatrixXd a(in.nx(), 2 * k_users);
  for (int k = 0; k < k_users; ++k) {
    a.col(k) = root_n * parts.tau(k) * parts.pinv.col(k);
    a.col(k_users + k) = root_n * parts.tau(k) * parts.pinv.col(k_users + k);
  }
  NnlsProblem nnls;
  nnls.c = a * in.cir->lambda.lambda;
  nnls.d = -(a * in.lifted_symbols());
  NnlsResult sol = solve_nnls(nnls);
  SlpOutput out = detail::closed_form_finish(in, parts, sol.delta);
  out.diag.iterations = sol.iterations;
  return out;
}

struct MmseOptions {
  int max_iter = 20;
  double rel_tol = 1e-8;
  bool shared_psi = false;      // force gamma_1 = ... = gamma_K (conventional baseline)
  bool force_beta_zero = false; // drop the aging terms (perfect-CSI objective)
};

namespace detail {

inline SlpOutput run_mmse(const SlpInput& in, const MmseOptions& opt, bool mil) {
  const Eigen::MatrixXd& h = *in.h;
  const int k_users = in.n_users();
  const int nx = in.nx();
  const double n_antennas = nx / 2.0;
  const Eigen::MatrixXd& lam = in.cir->lambda.lambda;
  Eigen::VectorXd s = in.lifted_symbols();
  Eigen::VectorXd beta2 = Eigen::VectorXd::Zero(k_users);
  if (!opt.force_beta_zero) beta2 = in.beta.array().square();
  const bool any_aging = beta2.maxCoeff() > 0.0 && (mil || in.e_grams);
  // Spherical stand-in scales ||m||^2/N for the low-complexity path.
  Eigen::VectorXd e_scale = in.mask_sq_norms / n_antennas;

  Eigen::VectorXd psi = Eigen::VectorXd::Ones(k_users);
  Eigen::VectorXd delta = Eigen::VectorXd::Zero(2 * k_users);
  Eigen::VectorXd st = s, u, hu;
  Eigen::MatrixXd p_mat;
  std::vector<double> trace;
  Eigen::MatrixXd hh_t;
  if (mil) hh_t = in.h_gram ? *in.h_gram : Eigen::MatrixXd(h * h.transpose());

  auto quad_e = [&](const Eigen::VectorXd& v, int k) -> double {
    if (beta2(k) == 0.0) return 0.0;
    if (mil) return e_scale(k) * v.squaredNorm();
    return in.e_grams ? v.dot((*in.e_grams)[k] * v) : 0.0;
  };

  int iters = 0;
  Eigen::VectorXd psi_for_filter = psi;
  for (int it = 0; it < opt.max_iter; ++it) {
    ++iters;
    psi_for_filter = psi;
    double xi = in.sigma2 * psi.squaredNorm() / in.p_t;
    Eigen::VectorXd psi2k(2 * k_users);
    psi2k << psi, psi;
    if (mil) {
      double kappa = xi;
      for (int k = 0; k < k_users; ++k) kappa += psi(k) * psi(k) * beta2(k) * e_scale(k);
      Eigen::MatrixXd small = psi2k.asDiagonal() * hh_t * psi2k.asDiagonal();
      small.diagonal().array() += kappa;
      Eigen::LLT<Eigen::MatrixXd> llt(small);
      if (llt.info() != Eigen::Success)
        throw SolverError("cimmse_rlc: inner 2K system not positive definite", psi, 0.0);
      p_mat = (h.transpose() * psi2k.asDiagonal()) * llt.solve(Eigen::MatrixXd::Identity(2 * k_users, 2 * k_users));
      st = s;  // delta pinned to zero
    } else {
      Eigen::MatrixXd psih = psi2k.asDiagonal() * h;
      Eigen::MatrixXd a = psih.transpose() * psih;
      if (any_aging)
        for (int k = 0; k < k_users; ++k)
          if (beta2(k) > 0.0) a += (psi(k) * psi(k) * beta2(k)) * (*in.e_grams)[k];
      a.diagonal().array() += xi;
      Eigen::LLT<Eigen::MatrixXd> llt(a);
      if (llt.info() != Eigen::Success)
        throw SolverError("cimmse_r: normal matrix not positive definite", psi, 0.0);
      p_mat = llt.solve(h.transpose() * psi2k.asDiagonal());
      // delta via the Cholesky-whitened NNLS program.
      Eigen::MatrixXd rest = n_antennas * (Eigen::MatrixXd::Identity(2 * k_users, 2 * k_users) -
                                           psi2k.asDiagonal() * (h * p_mat));
      rest = 0.5 * (rest + rest.transpose());
      rest.diagonal().array() += 1e-12;
      Eigen::LLT<Eigen::MatrixXd> rllt(rest);
      if (rllt.info() != Eigen::Success)
        throw SolverError("cimmse_r: Cholesky breakdown in the relaxation step", psi, 0.0);
      Eigen::MatrixXd b = rllt.matrixU();
      NnlsProblem nn{b * lam, -(b * s)};
      delta = solve_nnls(nn).delta;
      st = s + lam * delta;
    }
    u = p_mat * st;
    hu = h * u;

    // Objective before the psi update (first pass defines the baseline).
    auto objective = [&]() -> double {
      double val = st.squaredNorm();
      double uu = u.squaredNorm();
      for (int k = 0; k < k_users; ++k) {
        double hk2 = hu(k) * hu(k) + hu(k_users + k) * hu(k_users + k);
        double cross = st(k) * hu(k) + st(k_users + k) * hu(k_users + k);
        val += psi(k) * psi(k) * (hk2 + in.sigma2 * uu / in.p_t + beta2(k) * quad_e(u, k)) -
               2.0 * psi(k) * cross;
      }
      return val;
    };
    if (it == 0) trace.push_back(objective());

    if (opt.shared_psi) {
      double num = 0.0, den = 0.0;
      double uu = u.squaredNorm();
      for (int k = 0; k < k_users; ++k) {
        num += st(k) * hu(k) + st(k_users + k) * hu(k_users + k);
        den += hu(k) * hu(k) + hu(k_users + k) * hu(k_users + k) +
               in.sigma2 * uu / in.p_t + beta2(k) * quad_e(u, k);
      }
      if (num / den > 0.0) psi.setConstant(num / den);
    } else {
      double uu = u.squaredNorm();
      for (int k = 0; k < k_users; ++k) {
        double num = st(k) * hu(k) + st(k_users + k) * hu(k_users + k);
        double den = hu(k) * hu(k) + hu(k_users + k) * hu(k_users + k) +
                     in.sigma2 * uu / in.p_t + beta2(k) * quad_e(u, k);
        if (num / den > 0.0) psi(k) = num / den;
      }
    }
    trace.push_back(objective());
    size_t n_tr = trace.size();
    if (n_tr >= 2 && std::abs(trace[n_tr - 1] - trace[n_tr - 2]) <=
                         opt.rel_tol * (1.0 + std::abs(trace[n_tr - 1])))
      break;
  }

  if (!(u.squaredNorm() > 0.0))
    throw SolverError("mmse precoder: degenerate zero direction", psi, 0.0);
  double eta = std::sqrt(in.p_t / u.squaredNorm());
  SlpOutput out;
  out.x = eta * u;
  out.gamma = (eta / psi.array()).matrix();
  out.diag.objective = trace.back();
  out.diag.iterations = iters;
  out.diag.delta = delta;
  out.diag.target = st;
  out.diag.trace = std::move(trace);
  out.diag.psi = psi;
  out.diag.psi_for_filter = psi_for_filter;
  out.diag.eta = eta;
  return out;
}

}  // namespace detail

/// Alternating optimization for the robust MMSE objective: closed-form
/// (x, eta) for fixed psi, NNLS step for the CIR relaxation, then the
/// per-user psi stationarity update (accepted only when positive).
inline SlpOutput cimmse_r_precode(const SlpInput& in, const MmseOptions& opt = {}) {
  return detail::run_mmse(in, opt, false);
}

/// Low-complexity variant: spherical uncertainty stand-in, matrix-inversion-
/// lemma form of the filter (2K-dimensional solve), relaxation pinned to zero.
inline SlpOutput cimmse_rlc_precode(const SlpInput& in, const MmseOptions& opt = {}) {
  return detail::run_mmse(in, opt, true);
}

/// Conventional MMSE-criterion SLP baseline: the alternating algorithm
/// restricted to a shared rescaling factor with the aging terms dropped.
inline SlpOutput cimmse_precode(const SlpInput& in, MmseOptions opt = {}) {
  opt.shared_psi = true;
  opt.force_beta_zero = true;
  return detail::run_mmse(in, opt, false);
}

/// Minimum over users of the SINR lower bound gamma_k^2 / (beta_k^2 x'E_k x
/// + sigma^2), evaluated with the supplied (true) uncertainty operators.
inline double gamma_min_metric(const SlpOutput& out, const SlpInput& in) {
  double lo = std::numeric_limits<double>::infinity();
  for (int k = 0; k < in.n_users(); ++k) {
    double b2 = in.beta(k) * in.beta(k);
    double q = (b2 > 0.0 && in.e_grams) ? b2 * out.x.dot((*in.e_grams)[k] * out.x) : 0.0;
    lo = std::min(lo, out.gamma(k) * out.gamma(k) / (q + in.sigma2));
  }
  return lo;
}

}  // namespace slp

#endif  // SLP_PRECODERS_HPP
