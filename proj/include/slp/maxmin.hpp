#ifndef SLP_MAXMIN_HPP
#define SLP_MAXMIN_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Dense>

#include "slp/nnls.hpp"

namespace slp {

/// Max-min fractional program data: maximize min_k gamma_k / sqrt(beta_k^2
/// x' E_k x + sigma^2) over (x, gamma) subject to the CIR cone constraints
/// lambda_inv (H x - Gamma s) >= 0 and ||x||^2 <= P_T. H and s are the lifted
/// (real-stacked) channel and symbol vector.
struct MmfpProblem {
  const Eigen::MatrixXd* h = nullptr;           // 2K x 2N
  const Eigen::MatrixXd* lambda_inv = nullptr;  // 2K x 2K
  Eigen::VectorXd s;                            // 2K
  Eigen::VectorXd beta;                         // K
  const std::vector<Eigen::MatrixXd>* e_grams = nullptr;  // K of 2N x 2N, null => zero
  double sigma2 = 0.0;
  double p_t = 0.0;

  int n_users() const { return static_cast<int>(beta.size()); }
};

struct MaxMinOptions {
  double inner_tol = 1e-6;    // barrier duality-gap target (relative to 1+|t|)
  double outer_tol = 1e-7;    // Dinkelbach stop: inner value <= outer_tol*(1+lambda)
  int max_outer = 50;
  int max_newton_per_stage = 60;
  double gamma_floor = 1e-9;  // closes the open constraint gamma_k > 0
  double tb0_cold = 1.0;      // initial barrier multiplier, cold start
  double tb0_warm = 64.0;     // after the first Dinkelbach iteration
};

struct SubproblemResult {
  Eigen::VectorXd x;      // 2N
  Eigen::VectorXd gamma;  // K
  double t = 0.0;         // epigraph value = min_k (gamma_k - lambda g_k)
  int newton_steps = 0;
  double gap = 0.0;       // final barrier duality-gap bound
};

struct GdTraceRow {
  int outer = 0;
  double lambda = 0.0;
  double inner_value = 0.0;
  int newton_steps = 0;
};

struct GdResult {
  Eigen::VectorXd x;
  Eigen::VectorXd gamma;
  double lambda = 0.0;       // min_k gamma_k / g_k at the returned iterate
  double inner_value = 0.0;  // last epigraph value
  int outer_iters = 0;
  std::vector<GdTraceRow> trace;
};

namespace detail {

// Per-solve constant data for the barrier subproblem.
struct BarrierContext {
  const MmfpProblem* p = nullptr;
  Eigen::MatrixXd g_mat;  // lambda_inv * H          (2K x 2N)
  Eigen::MatrixXd w_mat;  // lambda_inv * S          (2K x K)
  int k_users = 0;
  int nx = 0;  // 2N

  explicit BarrierContext(const MmfpProblem& prob) : p(&prob) {
    k_users = prob.n_users();
    nx = static_cast<int>(prob.h->cols());
    g_mat = (*prob.lambda_inv) * (*prob.h);
    Eigen::MatrixXd s_mat = Eigen::MatrixXd::Zero(2 * k_users, k_users);
    for (int k = 0; k < k_users; ++k) {
      s_mat(k, k) = prob.s(k);
      s_mat(k_users + k, k) = prob.s(k_users + k);
    }
    w_mat = (*prob.lambda_inv) * s_mat;
  }

  const Eigen::MatrixXd* e_of(int k) const {
    return p->e_grams ? &(*p->e_grams)[k] : nullptr;
  }

  double g_value(const Eigen::VectorXd& x, int k, Eigen::VectorXd* q_out = nullptr) const {
    double b2 = p->beta(k) * p->beta(k);
    const Eigen::MatrixXd* e = e_of(k);
    if (b2 == 0.0 || e == nullptr) {
      if (q_out) q_out->setZero(nx);
      return std::sqrt(p->sigma2);
    }
    Eigen::VectorXd q = (*e) * x;
    double val = std::sqrt(b2 * x.dot(q) + p->sigma2);
    if (q_out) *q_out = std::move(q);
    return val;
  }
};

}  // namespace detail

/// Barrier-Newton solve of the epigraph form of the Dinkelbach subproblem:
/// maximize t s.t. t <= gamma_k - lambda g_k(x), CIR cone, power ball, and
/// gamma_k >= gamma_floor. The caller must provide a strictly feasible
/// (x0, gamma0). The barrier multiplier doubles per centering stage until the
/// gap bound m/tb falls under inner_tol * (1 + |t|).
inline SubproblemResult solve_subproblem(const detail::BarrierContext& ctx, double lambda,
                                         const MaxMinOptions& opt,
                                         const Eigen::VectorXd& x0,
                                         const Eigen::VectorXd& gamma0, double tb0) {
  const MmfpProblem& p = *ctx.p;
  const int k_users = ctx.k_users;
  const int nx = ctx.nx;
  const int n = nx + k_users + 1;
  const int m_constraints = 4 * k_users + 1;

  Eigen::VectorXd x = x0;
  Eigen::VectorXd gam = gamma0;

  // Strictly feasible epigraph start.
  double fmin = std::numeric_limits<double>::infinity();
  for (int k = 0; k < k_users; ++k)
    fmin = std::min(fmin, gam(k) - lambda * ctx.g_value(x, k));
  double t_val = fmin - 0.1 * (1.0 + std::abs(fmin));

  std::vector<Eigen::VectorXd> q(k_users), r(k_users);
  Eigen::MatrixXd hess(n, n);
  Eigen::VectorXd grad(n), dir(n);
  int total_newton = 0;

  double tb = tb0;
  for (;;) {
    for (int it = 0; it < opt.max_newton_per_stage; ++it) {
      ++total_newton;
      // Constraint values.
      Eigen::VectorXd f(k_users), g_val(k_users);
      for (int k = 0; k < k_users; ++k) {
        g_val(k) = ctx.g_value(x, k, &q[k]);
        f(k) = gam(k) - lambda * g_val(k) - t_val;
      }
      Eigen::VectorXd cir = ctx.g_mat * x - ctx.w_mat * gam;
      double cpow = p.p_t - x.squaredNorm();

      grad.setZero();
      hess.setZero();
      grad(n - 1) = -tb;

      // Epigraph/SOC constraints.
      Eigen::VectorXd vfull(n);
      for (int k = 0; k < k_users; ++k) {
        double b2 = p.beta(k) * p.beta(k);
        vfull.setZero();
        if (b2 > 0.0 && ctx.e_of(k)) {
          vfull.head(nx) = -(lambda * b2 / g_val(k)) * q[k];
          double c1 = lambda * b2 / (g_val(k) * f(k));
          double c2 = lambda * b2 * b2 / (g_val(k) * g_val(k) * g_val(k) * f(k));
          hess.topLeftCorner(nx, nx) += c1 * (*ctx.e_of(k));
          hess.topLeftCorner(nx, nx) -= c2 * (q[k] * q[k].transpose());
        }
        vfull(nx + k) = 1.0;
        vfull(n - 1) = -1.0;
        grad -= vfull / f(k);
        hess += (vfull / f(k)) * (vfull / f(k)).transpose();
      }

      // CIR cone rows (linear).
      Eigen::ArrayXd inv_c = cir.array().inverse();
      grad.head(nx) -= ctx.g_mat.transpose() * inv_c.matrix();
      grad.segment(nx, k_users) += ctx.w_mat.transpose() * inv_c.matrix();
      Eigen::MatrixXd gn = inv_c.matrix().asDiagonal() * ctx.g_mat;
      Eigen::MatrixXd wn = inv_c.matrix().asDiagonal() * ctx.w_mat;
      hess.topLeftCorner(nx, nx) += gn.transpose() * gn;
      hess.block(0, nx, nx, k_users) -= gn.transpose() * wn;
      hess.block(nx, 0, k_users, nx) -= wn.transpose() * gn;
      hess.block(nx, nx, k_users, k_users) += wn.transpose() * wn;

      // Power ball.
      grad.head(nx) += (2.0 / cpow) * x;
      hess.topLeftCorner(nx, nx) += (4.0 / (cpow * cpow)) * (x * x.transpose());
      hess.topLeftCorner(nx, nx).diagonal().array() += 2.0 / cpow;

      // gamma floor.
      for (int k = 0; k < k_users; ++k) {
        double cf = gam(k) - opt.gamma_floor;
        grad(nx + k) -= 1.0 / cf;
        hess(nx + k, nx + k) += 1.0 / (cf * cf);
      }

      // Newton direction with a small ridge fallback.
      Eigen::LLT<Eigen::MatrixXd> llt(hess);
      double ridge = 1e-13 * (1.0 + hess.diagonal().maxCoeff());
      while (llt.info() != Eigen::Success) {
        hess.diagonal().array() += ridge;
        ridge *= 100.0;
        llt.compute(hess);
        if (ridge > 1e3)
          throw SolverError("solve_subproblem: Hessian factorization failed", x, 0.0);
      }
      dir = llt.solve(-grad);
      double dec2 = -grad.dot(dir);
      if (dec2 * 0.5 <= 1e-9 * (1.0 + m_constraints)) break;

      // Line search on precomputed ray coefficients.
      Eigen::VectorXd dx = dir.head(nx);
      Eigen::VectorXd dg = dir.segment(nx, k_users);
      double dt = dir(n - 1);
      Eigen::VectorXd cir_d = ctx.g_mat * dx - ctx.w_mat * dg;
      double px = x.dot(dx), pd = dx.squaredNorm();
      Eigen::VectorXd s0(k_users), s1(k_users), s2(k_users);
      for (int k = 0; k < k_users; ++k) {
        double b2 = p.beta(k) * p.beta(k);
        if (b2 > 0.0 && ctx.e_of(k)) {
          r[k] = (*ctx.e_of(k)) * dx;
          s0(k) = g_val(k) * g_val(k);
          s1(k) = 2.0 * b2 * q[k].dot(dx);
          s2(k) = b2 * dx.dot(r[k]);
        } else {
          s0(k) = p.sigma2;
          s1(k) = s2(k) = 0.0;
        }
      }
      auto phi_at = [&](double a, bool* feasible) -> double {
        double val = tb * (-(t_val + a * dt));
        *feasible = true;
        for (int k = 0; k < k_users; ++k) {
          double fk = gam(k) + a * dg(k) - t_val - a * dt -
                      lambda * std::sqrt(std::max(0.0, s0(k) + a * (s1(k) + a * s2(k))));
          if (fk <= 0.0) { *feasible = false; return 0.0; }
          val -= std::log(fk);
        }
        for (int j = 0; j < 2 * k_users; ++j) {
          double cj = cir(j) + a * cir_d(j);
          if (cj <= 0.0) { *feasible = false; return 0.0; }
          val -= std::log(cj);
        }
        double cp = cpow - a * (2.0 * px + a * pd);
        if (cp <= 0.0) { *feasible = false; return 0.0; }
        val -= std::log(cp);
        for (int k = 0; k < k_users; ++k) {
          double cf = gam(k) + a * dg(k) - opt.gamma_floor;
          if (cf <= 0.0) { *feasible = false; return 0.0; }
          val -= std::log(cf);
        }
        return val;
      };
      bool ok = false;
      double phi0 = phi_at(0.0, &ok);
      double alpha = 1.0;
      double slope = grad.dot(dir);
      for (int ls = 0; ls < 80; ++ls) {
        bool feas = false;
        double val = phi_at(alpha, &feas);
        if (feas && val <= phi0 + 0.25 * alpha * slope) break;
        alpha *= 0.6;
      }
      x += alpha * dx;
      gam += alpha * dg;
      t_val += alpha * dt;
      if (it + 1 >= opt.max_newton_per_stage)
        throw SolverError("solve_subproblem: Newton budget exhausted", x,
                          dec2 * 0.5);
    }
    if (m_constraints / tb <= opt.inner_tol * (1.0 + std::abs(t_val))) break;
    tb *= 2.0;  // barrier parameter halves per centering stage
  }

  SubproblemResult res;
  res.x = std::move(x);
  res.gamma = std::move(gam);
  res.t = t_val;
  res.newton_steps = total_newton;
  res.gap = m_constraints / tb;
  return res;
}

namespace detail {

// Closed-form warm start (power-scaled regularized pseudo-inverse direction):
// x on the power sphere with H x proportional to Theta s, shrunk into the
// strict interior of every constraint.
inline void warm_start(const BarrierContext& ctx, Eigen::VectorXd& x,
                       Eigen::VectorXd& gam) {
  const MmfpProblem& p = *ctx.p;
  const int k_users = ctx.k_users;
  const double n_antennas = ctx.nx / 2.0;
  Eigen::VectorXd tau(k_users);
  for (int k = 0; k < k_users; ++k) {
    double msq = ctx.e_of(k) ? 0.5 * ctx.e_of(k)->trace() : 0.0;
    tau(k) = std::sqrt(p.beta(k) * p.beta(k) * msq * p.p_t / n_antennas + p.sigma2);
  }
  Eigen::VectorXd theta_s(2 * k_users);
  for (int k = 0; k < k_users; ++k) {
    theta_s(k) = tau(k) * p.s(k);
    theta_s(k_users + k) = tau(k) * p.s(k_users + k);
  }
  const Eigen::MatrixXd& h = *p.h;
  Eigen::LLT<Eigen::MatrixXd> llt(h * h.transpose());
  if (llt.info() != Eigen::Success)
    throw SolverError("maxmin warm start: rank-deficient channel", Eigen::VectorXd(), 0.0);
  Eigen::VectorXd v = h.transpose() * llt.solve(theta_s);
  double scale = std::sqrt(p.p_t) / v.norm();
  x = (0.995 * scale) * v;
  gam = (0.9 * 0.995 * scale) * tau;
}

inline double min_ratio(const BarrierContext& ctx, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& gam) {
  double lo = std::numeric_limits<double>::infinity();
  for (int k = 0; k < ctx.k_users; ++k)
    lo = std::min(lo, gam(k) / ctx.g_value(x, k));
  return lo;
}

}  // namespace detail

/// Convenience overload: builds the barrier context and a feasible start.
inline SubproblemResult solve_subproblem(const MmfpProblem& problem, double lambda,
                                         const MaxMinOptions& opt = {}) {
  detail::BarrierContext ctx(problem);
  Eigen::VectorXd x, gam;
  detail::warm_start(ctx, x, gam);
  return solve_subproblem(ctx, lambda, opt, x, gam, opt.tb0_cold);
}

/// Generalized Dinkelbach outer loop. The parameter sequence lambda is
/// nondecreasing by construction; iteration stops once the subproblem value
/// falls below outer_tol * (1 + lambda).
inline GdResult solve_gd(const MmfpProblem& problem, const MaxMinOptions& opt = {}) {
  if (!(problem.sigma2 > 0.0) || !(problem.p_t > 0.0))
    throw std::invalid_argument("solve_gd: sigma2 and p_t must be positive");
  detail::BarrierContext ctx(problem);

  Eigen::VectorXd x, gam;
  detail::warm_start(ctx, x, gam);
  double lambda = std::max(0.0, detail::min_ratio(ctx, x, gam));

  GdResult out;
  for (int outer = 1; outer <= opt.max_outer; ++outer) {
    double tb0 = outer == 1 ? opt.tb0_cold : opt.tb0_warm;
    SubproblemResult sub = solve_subproblem(ctx, lambda, opt, x, gam, tb0);
    double ratio = detail::min_ratio(ctx, sub.x, sub.gamma);
    out.trace.push_back({outer, lambda, sub.t, sub.newton_steps});
    out.x = sub.x;
    out.gamma = sub.gamma;
    out.inner_value = sub.t;
    out.outer_iters = outer;
    out.lambda = ratio;
    if (sub.t <= opt.outer_tol * (1.0 + lambda)) {
      // The optimal transmit power is the full budget: scaling (x, gamma)
      // jointly onto the power sphere preserves the cone constraints and can
      // only raise every ratio.
      double c = std::sqrt(problem.p_t / out.x.squaredNorm());
      out.x *= c;
      out.gamma *= c;
      out.lambda = detail::min_ratio(ctx, out.x, out.gamma);
      return out;
    }
    // Guard keeps the parameter trace monotone under inexact inner solves.
    lambda = std::max(lambda, ratio);
    x = 0.999 * sub.x;
    gam = 0.98 * sub.gamma;
  }
  throw SolverError("solve_gd: no convergence within max_outer", out.x, out.inner_value);
}

}  // namespace slp

#endif  // SLP_MAXMIN_HPP
