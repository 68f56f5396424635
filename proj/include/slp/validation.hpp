#ifndef SLP_VALIDATION_HPP
#define SLP_VALIDATION_HPP

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Dense>
#include <Eigen/QR>

#include "slp/channel_model.hpp"
#include "slp/cir_geometry.hpp"
#include "slp/nnls.hpp"
#include "slp/precoders.hpp"
#include "slp/real_lift.hpp"
#include "slp/rng.hpp"

namespace slp {

struct CheckResult {
  std::string name;
  bool passed = true;
  std::vector<std::string> lines;

  void check(bool ok, const std::string& what) {
    passed = passed && ok;
    lines.push_back(std::string(ok ? "  ok   " : "  FAIL ") + what);
  }
  template <typename T>
  void note(const std::string& what, T value) {
    std::ostringstream os;
    os << "       " << what << " = " << value;
    lines.push_back(os.str());
  }
};

namespace detail {

/// Self-contained random instance used by the property suites.
struct Instance {
  ArrayConfig array;
  Eigen::MatrixXcd grid;
  std::vector<Eigen::VectorXd> masks;
  std::vector<Eigen::MatrixXd> e_grams;
  Eigen::VectorXd mask_sq;
  Eigen::VectorXd beta;
  Eigen::MatrixXcd h_bar;  // K x N channel means
  Eigen::MatrixXd h_lift;
  CirSpec cir;
  double sigma2 = 0.0;
  double p_t = 1.0;

  SlpInput input() const {
    SlpInput in;
    in.h = &h_lift;
    in.cir = &cir;
    in.beta = beta;
    in.e_grams = &e_grams;
    in.mask_sq_norms = mask_sq;
    in.sigma2 = sigma2;
    in.p_t = p_t;
    return in;
  }
};

inline Instance make_instance(const ArrayConfig& array, int k_users, double alpha,
                              int modulation, double snr_db, Rng& rng,
                              const MaskProfile& profile = MaskProfile::independent(),
                              int n_clusters = 3) {
  Instance inst;
  inst.array = array;
  inst.grid = build_dft_grid(array);
  inst.masks = synthesize_mask_set(rng, k_users, n_clusters, array, profile);
  inst.mask_sq.resize(k_users);
  for (int k = 0; k < k_users; ++k) {
    inst.e_grams.push_back(build_uncertainty(inst.masks[k], inst.grid).e);
    inst.mask_sq(k) = inst.masks[k].squaredNorm();
  }
  inst.beta = Eigen::VectorXd::Constant(k_users, std::sqrt(std::max(0.0, 1.0 - alpha * alpha)));
  inst.h_bar.resize(k_users, array.n_antennas);
  for (int k = 0; k < k_users; ++k) {
    Eigen::VectorXcd g = rng.cnormal_vector(inst.masks[k].size());
    inst.h_bar.row(k) =
        alpha * (inst.grid.conjugate() * (inst.masks[k].array() * g.array()).matrix()).transpose();
  }
  inst.h_lift = lift_channel(inst.h_bar);
  PskConstellation psk = psk_constellation(modulation);
  Eigen::VectorXcd sc(k_users);
  for (int k = 0; k < k_users; ++k) sc(k) = psk.points(rng.uniform_int(modulation));
  inst.cir = make_cir_spec(sc, modulation);
  inst.sigma2 = 1.0 / std::pow(10.0, snr_db / 10.0);
  return inst;
}

/// Best per-user rescaling factors making (x, gamma) feasible for the CIR
/// equality form, or empty if infeasible. w = Lambda^{-1} H x must dominate
/// gamma_k * (Lambda^{-1} s) componentwise.
inline Eigen::VectorXd best_gamma_for(const Instance& inst, const Eigen::VectorXd& x) {
  const int k_users = static_cast<int>(inst.beta.size());
  Eigen::VectorXd w = inst.cir.lambda.inverse * (inst.h_lift * x);
  Eigen::VectorXd z = inst.cir.lambda.inverse * lift_vector(inst.cir.symbols);
  Eigen::VectorXd gamma(k_users);
  for (int k = 0; k < k_users; ++k) {
    double g1 = w(k) / z(k);
    double g2 = w(k_users + k) / z(k_users + k);
    double g = std::min(g1, g2);
    if (!(g > 0.0)) return Eigen::VectorXd();
    gamma(k) = g;
  }
  return gamma;
}

/// Full robust MMSE objective at arbitrary (x, eta, psi, s_tilde).
inline double mmse_objective(const Instance& inst, const Eigen::VectorXd& x, double eta,
                             const Eigen::VectorXd& psi, const Eigen::VectorXd& st) {
  const int k_users = static_cast<int>(inst.beta.size());
  Eigen::VectorXd hx = inst.h_lift * x;
  double val = 0.0;
  for (int k = 0; k < k_users; ++k) {
    double er = psi(k) * hx(k) / eta - st(k);
    double ei = psi(k) * hx(k_users + k) / eta - st(k_users + k);
    double b2 = inst.beta(k) * inst.beta(k);
    double var = b2 * x.dot(inst.e_grams[k] * x) + inst.sigma2;
    val += er * er + ei * ei + psi(k) * psi(k) * var / (eta * eta);
  }
  return val;
}

}  // namespace detail

/// Diagonal-Gram shortcut soundness: on constructed diagonal-Gram CIR
/// problems the active-set solver returns delta = 0 (norm <= 1e-8).
inline CheckResult validate_lemma1(int n_cases = 100, std::uint64_t seed = 101) {
  CheckResult res{"lemma1"};
  Rng rng(seed);
  int hits = 0;
  double worst = 0.0;
  for (int c = 0; c < n_cases; ++c) {
    int k_users = 1 + rng.uniform_int(6);
    int mod = 4 << rng.uniform_int(3);
    PskConstellation psk = psk_constellation(mod);
    Eigen::VectorXcd sc(k_users);
    for (int k = 0; k < k_users; ++k) sc(k) = psk.points(rng.uniform_int(mod));
    CirSpec cir = make_cir_spec(sc, mod);
    // A = Q D with orthonormal Q and positive diagonal D => A^T A diagonal.
    int m = 2 * k_users + rng.uniform_int(5);
    Eigen::MatrixXd raw(m, 2 * k_users);
    for (int i = 0; i < raw.size(); ++i) raw(i) = rng.normal();
    Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(raw).householderQ() *
                        Eigen::MatrixXd::Identity(m, 2 * k_users);
    Eigen::VectorXd d(2 * k_users);
    for (int i = 0; i < d.size(); ++i) d(i) = 0.2 + rng.uniform();
    Eigen::MatrixXd a = q * d.asDiagonal();

    Eigen::VectorXd s = lift_vector(sc);
    if (lemma1_shortcut(s, a).has_value()) ++hits;
    NnlsProblem prob{a * cir.lambda.lambda, -(a * s)};
    NnlsResult sol = solve_nnls(prob);
    worst = std::max(worst, sol.delta.norm());
  }
  res.check(hits == n_cases, "shortcut fires on every constructed diagonal-Gram case");
  res.check(worst <= 1e-8, "active-set solution norm <= 1e-8 on all cases");
  res.note("worst ||delta||", worst);
  return res;
}

/// Closed-form optimality audit: the exact closed form (NNLS relaxation plus
/// scaled pseudo-inverse) dominates random feasible probes of the simplified
/// balancing objective min_k gamma_k^2 / tau_k^2.
inline CheckResult validate_prop2(int n_instances = 20, int n_probes = 100,
                                  std::uint64_t seed = 102) {
  CheckResult res{"prop2"};
  Rng rng(seed);
  double worst_slack = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_instances; ++i) {
    detail::Instance inst =
        detail::make_instance(ArrayConfig::ula(64, 1), 4, 0.95, 8, 20.0, rng);
    SlpOutput cf = closed_form_with_nnls(inst.input());
    const int k_users = 4;
    Eigen::VectorXd tau(k_users);
    for (int k = 0; k < k_users; ++k)
      tau(k) = std::sqrt(inst.beta(k) * inst.beta(k) * inst.mask_sq(k) * inst.p_t / 64.0 +
                         inst.sigma2);
    Eigen::LLT<Eigen::MatrixXd> llt(inst.h_lift * inst.h_lift.transpose());
    Eigen::MatrixXd hp = inst.h_lift.transpose() *
                         llt.solve(Eigen::MatrixXd::Identity(2 * k_users, 2 * k_users));
    Eigen::VectorXd s = lift_vector(inst.cir.symbols);
    for (int p = 0; p < n_probes; ++p) {
      Eigen::VectorXd delta(2 * k_users);
      for (int j = 0; j < delta.size(); ++j)
        delta(j) = rng.uniform() < 0.4 ? 0.0 : -std::log(1.0 - rng.uniform());
      Eigen::VectorXd st = s + inst.cir.lambda.lambda * delta;
      Eigen::VectorXd theta_st(2 * k_users);
      for (int k = 0; k < k_users; ++k) {
        theta_st(k) = tau(k) * st(k);
        theta_st(k_users + k) = tau(k) * st(k_users + k);
      }
      Eigen::VectorXd v = hp * theta_st;
      Eigen::VectorXd x = std::sqrt(inst.p_t) / v.norm() * v;
      Eigen::VectorXd gam = detail::best_gamma_for(inst, x);
      if (gam.size() == 0) continue;
      double probe_obj = std::numeric_limits<double>::infinity();
      for (int k = 0; k < k_users; ++k)
        probe_obj = std::min(probe_obj, gam(k) * gam(k) / (tau(k) * tau(k)));
      worst_slack = std::min(worst_slack, cf.diag.objective - probe_obj);
    }
  }
  res.check(worst_slack >= -1e-6, "closed-form objective >= every probe - 1e-6");
  res.note("worst slack", worst_slack);
  return res;
}

/// Gram off-diagonal decay of the two NNLS designs as the array grows:
/// kind 0 is the tau-weighted pseudo-inverse design, kind 1 the whitened
/// MMSE-filter design in its matrix-inversion-lemma form (psi = 1).
inline CheckResult validate_gram_trend(int kind, std::uint64_t seed = 103,
                                       int n_draws = 50) {
  CheckResult res{kind == 0 ? "prop3" : "prop5"};
  Rng rng(seed);
  const int k_users = 4;
  const double alpha = 0.95, snr_db = 20.0;
  std::vector<int> sizes = {16, 64, 256};
  std::vector<double> means;
  for (int n : sizes) {
    double acc = 0.0;
    for (int d = 0; d < n_draws; ++d) {
      detail::Instance inst =
          detail::make_instance(ArrayConfig::ula(n, 1), k_users, alpha, 8, snr_db, rng);
      Eigen::VectorXd tau(k_users);
      double kappa = inst.sigma2 / inst.p_t * k_users;
      for (int k = 0; k < k_users; ++k) {
        tau(k) = std::sqrt(inst.beta(k) * inst.beta(k) * inst.mask_sq(k) * inst.p_t / n +
                           inst.sigma2);
        kappa += inst.beta(k) * inst.beta(k) * inst.mask_sq(k) / n;
      }
      if (kind == 0) {
        Eigen::LLT<Eigen::MatrixXd> llt(inst.h_lift * inst.h_lift.transpose());
        Eigen::MatrixXd hp = inst.h_lift.transpose() *
                             llt.solve(Eigen::MatrixXd::Identity(2 * k_users, 2 * k_users));
        Eigen::MatrixXd a(2 * n, 2 * k_users);
        for (int k = 0; k < k_users; ++k) {
          a.col(k) = std::sqrt(static_cast<double>(n)) * tau(k) * hp.col(k);
          a.col(k_users + k) = std::sqrt(static_cast<double>(n)) * tau(k) * hp.col(k_users + k);
        }
        acc += gram_diagnostic(a).offdiag_ratio;
      } else {
        // R_A = N (I - H P̂) with P̂ = H^T (H H^T + kappa I)^{-1}  (psi = 1)
        Eigen::MatrixXd gram = inst.h_lift * inst.h_lift.transpose();
        Eigen::MatrixXd reg = gram;
        reg.diagonal().array() += kappa;
        Eigen::MatrixXd r_a = static_cast<double>(n) *
            (Eigen::MatrixXd::Identity(2 * k_users, 2 * k_users) - gram * reg.llt().solve(
                 Eigen::MatrixXd::Identity(2 * k_users, 2 * k_users)));
        acc += offdiag_frobenius_ratio(r_a);
      }
    }
    means.push_back(acc / n_draws);
  }
  for (size_t i = 0; i + 1 < means.size(); ++i) {
    std::ostringstream os;
    os << "mean offdiag ratio N=" << sizes[i] << " (" << means[i] << ") > N=" << sizes[i + 1]
       << " (" << means[i + 1] << ")";
    res.check(means[i] > means[i + 1], os.str());
  }
  return res;
}

/// Stationarity of the alternating MMSE solve: feasible-direction central
/// finite differences of the objective in x vanish at the returned filter
/// output, and accepted per-user weight updates zero their own gradient.
inline CheckResult validate_prop4(int n_instances = 5, std::uint64_t seed = 104) {
  CheckResult res{"prop4"};
  Rng rng(seed);
  double worst_fd = 0.0, worst_grad = 0.0;
  for (int i = 0; i < n_instances; ++i) {
    detail::Instance inst = detail::make_instance(
        ArrayConfig::upa(4, 8, 4, true), 9, 0.95, 8, 25.0, rng, MaskProfile::shared_hotspots());
    SlpOutput out = cimmse_r_precode(inst.input());
    const int k_users = 9;
    const Eigen::VectorXd& psi_f = out.diag.psi_for_filter;
    const Eigen::VectorXd& st = out.diag.target;
    double eta = out.diag.eta;
    // (a) x-stationarity along feasible (power-sphere tangent) directions.
    for (int d = 0; d < 10; ++d) {
      Eigen::VectorXd dir(out.x.size());
      for (int j = 0; j < dir.size(); ++j) dir(j) = rng.normal();
      dir -= dir.dot(out.x) / out.x.squaredNorm() * out.x;
      dir.normalize();
      double eps = 1e-5;
      double fp = detail::mmse_objective(inst, out.x + eps * dir, eta, psi_f, st);
      double fm = detail::mmse_objective(inst, out.x - eps * dir, eta, psi_f, st);
      worst_fd = std::max(worst_fd, std::abs(fp - fm) / (2.0 * eps));
    }
    // (b) psi-gradient after accepted updates, with u from the final filter.
    Eigen::VectorXd u = out.x / eta;
    Eigen::VectorXd hu = inst.h_lift * u;
    double uu = u.squaredNorm();
    for (int k = 0; k < k_users; ++k) {
      double b2 = inst.beta(k) * inst.beta(k);
      double ueu = u.dot(inst.e_grams[k] * u);
      double num = st(k) * hu(k) + st(k_users + k) * hu(k_users + k);
      double den = hu(k) * hu(k) + hu(k_users + k) * hu(k_users + k) +
                   inst.sigma2 * uu / inst.p_t + b2 * ueu;
      if (num / den <= 0.0) continue;  // rejected update: gradient need not vanish
      double psi_k = out.diag.psi(k);
      double grad = 2.0 * psi_k * (hu(k) * hu(k) + hu(k_users + k) * hu(k_users + k)) -
                    2.0 * num + 2.0 * psi_k * inst.sigma2 * uu / inst.p_t +
                    2.0 * psi_k * b2 * ueu;
      worst_grad = std::max(worst_grad, std::abs(grad));
    }
  }
  res.check(worst_fd < 1e-4, "feasible-direction derivatives of the objective < 1e-4");
  res.check(worst_grad < 1e-6, "|df/dpsi_k| < 1e-6 after accepted updates");
  res.note("worst |directional fd|", worst_fd);
  res.note("worst |psi gradient|", worst_grad);
  return res;
}

/// Matrix-inversion-lemma identity: the 2N-dimensional and 2K-dimensional
/// forms of the regularized filter agree.
inline CheckResult validate_mil(int n_instances = 50, std::uint64_t seed = 105) {
  CheckResult res{"mil"};
  Rng rng(seed);
  double worst = 0.0;
  for (int i = 0; i < n_instances; ++i) {
    bool big = i % 2 == 1;
    ArrayConfig array = big ? ArrayConfig::upa(4, 8, 4, true) : ArrayConfig::ula(32, 1);
    int k_users = big ? 9 : 4;
    detail::Instance inst = detail::make_instance(array, k_users, 0.95, 8, 20.0, rng);
    Eigen::VectorXd psi(k_users);
    for (int k = 0; k < k_users; ++k) psi(k) = 0.25 + rng.uniform();
    double kappa = inst.sigma2 / inst.p_t * psi.squaredNorm();
    for (int k = 0; k < k_users; ++k)
      kappa += psi(k) * psi(k) * inst.beta(k) * inst.beta(k) * inst.mask_sq(k) /
               array.n_antennas;
    Eigen::VectorXd psi2k(2 * k_users);
    psi2k << psi, psi;
    const Eigen::MatrixXd& h = inst.h_lift;
    Eigen::MatrixXd psih = psi2k.asDiagonal() * h;
    // 2N-dimensional form
    Eigen::MatrixXd a = psih.transpose() * psih;
    a.diagonal().array() += kappa;
    Eigen::MatrixXd p_big = a.llt().solve(h.transpose() * psi2k.asDiagonal());
    // 2K-dimensional MIL form
    Eigen::MatrixXd small = psih * psih.transpose();
    small.diagonal().array() += kappa;
    Eigen::MatrixXd p_small = (h.transpose() * psi2k.asDiagonal()) *
        small.llt().solve(Eigen::MatrixXd::Identity(2 * k_users, 2 * k_users));
    worst = std::max(worst, (p_big - p_small).norm() / p_big.norm());
  }
  res.check(worst <= 1e-8, "relative Frobenius gap of the two filter forms <= 1e-8");
  res.note("worst relative gap", worst);
  return res;
}

/// Quasi-static collapse at alpha = 1: the robust balancing solve matches the
/// conventional one, the closed form collapses to power-scaled ZF, and the
/// aging penalty term of the MMSE solve vanishes identically.
inline CheckResult validate_degeneracy(std::uint64_t seed = 106) {
  CheckResult res{"degeneracy"};
  Rng rng(seed);
  double worst_rel = 0.0, worst_angle = 0.0, worst_ups = 0.0;
  for (int i = 0; i < 5; ++i) {
    bool big = i >= 3;
    ArrayConfig array = big ? ArrayConfig::upa(4, 8, 4, true) : ArrayConfig::ula(14, 1);
    int k_users = big ? 9 : 12;
    detail::Instance inst = detail::make_instance(array, k_users, 1.0, 8, 20.0, rng);
    SlpInput in = inst.input();
    SlpOutput robust = cisb_r_precode(in);
    SlpOutput conv = cisb_precode(in);
    worst_rel = std::max(worst_rel,
                         std::abs(robust.diag.objective - conv.diag.objective) /
                             std::max(1e-300, std::abs(conv.diag.objective)));
    SlpOutput rlc = cisb_rlc_precode(in);
    SlpOutput zf = zf_precode(in);
    double cosang = rlc.x.dot(zf.x) / (rlc.x.norm() * zf.x.norm());
    worst_angle = std::max(worst_angle, std::acos(std::min(1.0, std::abs(cosang))));
    SlpOutput mmse = cimmse_r_precode(in);
    // Upsilon = sum psi_k^2 beta_k^2 E_k with beta identically zero.
    double ups = 0.0;
    for (int k = 0; k < k_users; ++k)
      ups += mmse.diag.psi(k) * mmse.diag.psi(k) * inst.beta(k) * inst.beta(k) *
             inst.e_grams[k].cwiseAbs().maxCoeff();
    worst_ups = std::max(worst_ups, ups);
  }
  res.check(worst_rel <= 1e-5, "robust balancing == conventional balancing (rel objective)");
  res.check(worst_angle <= 1e-6, "closed form == power-scaled ZF direction (angle)");
  res.check(worst_ups == 0.0, "MMSE aging term is exactly zero");
  res.note("worst relative objective gap", worst_rel);
  res.note("worst angle [rad]", worst_angle);
  return res;
}

/// Alternating MMSE descent: the objective trace never increases (1e-9
/// tolerance) and at the large-array configuration at least 90% of the total
/// decrease happens in the first five iterations.
inline CheckResult validate_monotone(int n_instances = 20, std::uint64_t seed = 107) {
  CheckResult res{"monotone"};
  Rng rng(seed);
  double worst_rise = 0.0, worst_frac = 1.0;
  MmseOptions opt;
  opt.rel_tol = 0.0;  // full-length traces
  for (int i = 0; i < n_instances; ++i) {
    bool upa = i % 2 == 0;
    detail::Instance inst = upa
        ? detail::make_instance(ArrayConfig::upa(4, 8, 4, true), 9, 0.95, 8, 25.0, rng,
                                MaskProfile::shared_hotspots())
        : detail::make_instance(ArrayConfig::ula(14, 1), 12, 0.995, 8, 25.0, rng);
    SlpOutput out = cimmse_r_precode(inst.input(), opt);
    const std::vector<double>& tr = out.diag.trace;
    for (size_t j = 1; j < tr.size(); ++j)
      worst_rise = std::max(worst_rise, tr[j] - tr[j - 1]);
    if (upa && tr.size() > 6) {
      double total = tr.front() - tr.back();
      double first5 = tr.front() - tr[5];
      if (total > 1e-12) worst_frac = std::min(worst_frac, first5 / total);
    }
  }
  res.check(worst_rise <= 1e-9, "objective nonincreasing per iteration (tol 1e-9)");
  res.check(worst_frac >= 0.9, ">= 90% of the decrease happens in the first 5 iterations");
  res.note("worst per-step rise", worst_rise);
  res.note("worst first-5 fraction", worst_frac);
  return res;
}

/// Dinkelbach behavior: nondecreasing parameter trace and the single-user
/// analytic optimum lambda* = sqrt(P_T) ||h|| / sigma at beta = 0.
inline CheckResult validate_dinkelbach(std::uint64_t seed = 108) {
  CheckResult res{"dinkelbach"};
  Rng rng(seed);
  double worst_dip = 0.0;
  for (int i = 0; i < 5; ++i) {
    detail::Instance inst =
        detail::make_instance(ArrayConfig::ula(14, 1), 12, 0.995, 8, 25.0, rng);
    SlpOutput out = cisb_r_precode(inst.input());
    const auto& tr = out.diag.gd_trace;
    for (size_t j = 1; j < tr.size(); ++j)
      worst_dip = std::max(worst_dip, tr[j - 1].lambda - tr[j].lambda);
  }
  res.check(worst_dip <= 1e-9, "lambda trace nondecreasing (tol 1e-9)");

  double worst_rel = 0.0;
  for (int i = 0; i < 5; ++i) {
    detail::Instance inst = detail::make_instance(ArrayConfig::ula(8, 1), 1, 1.0, 8, 20.0, rng);
    SlpOutput out = cisb_precode(inst.input());
    double analytic = std::sqrt(inst.p_t) * inst.h_bar.row(0).norm() / std::sqrt(inst.sigma2);
    double lambda_star = std::sqrt(out.diag.objective);
    worst_rel = std::max(worst_rel, std::abs(lambda_star - analytic) / analytic);
  }
  res.check(worst_rel <= 1e-4, "single-user lambda* matches sqrt(P_T)||h||/sigma (rel 1e-4)");
  res.note("worst single-user relative gap", worst_rel);
  return res;
}

}  // namespace slp

#endif  // SLP_VALIDATION_HPP
