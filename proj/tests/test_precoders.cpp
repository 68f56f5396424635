#include <catch2/catch_amalgamated.hpp>

#include "slp/precoders.hpp"
#include "slp/validation.hpp"

using namespace slp;

namespace {

detail::Instance inst_of(Rng& rng, int n, int k, double alpha, double snr_db,
                         const MaskProfile& profile = MaskProfile::independent()) {
  ArrayConfig array = (n == 64) ? ArrayConfig::upa(4, 8, 4, true) : ArrayConfig::ula(n, 1);
  return detail::make_instance(array, k, alpha, 8, snr_db, rng, profile);
}

Eigen::VectorXd cir_residual(const detail::Instance& inst, const SlpOutput& out) {
  const int k_users = static_cast<int>(out.gamma.size());
  Eigen::VectorXd s = lift_vector(inst.cir.symbols);
  Eigen::VectorXd gs(2 * k_users);
  for (int k = 0; k < k_users; ++k) {
    gs(k) = out.gamma(k) * s(k);
    gs(k_users + k) = out.gamma(k) * s(k_users + k);
  }
  return inst.cir.lambda.inverse * (inst.h_lift * out.x - gs);
}

}  // namespace

TEST_CASE("zero forcing removes multi-user interference") {
  Rng rng(101);
  detail::Instance inst = inst_of(rng, 12, 5, 0.95, 20.0);
  SlpInput in = inst.input();
  SlpOutput out = zf_precode(in);
  Eigen::VectorXd s = lift_vector(inst.cir.symbols);
  Eigen::VectorXd hx = inst.h_lift * out.x;
  REQUIRE((hx - out.gamma(0) * s).cwiseAbs().maxCoeff() < 1e-10);
  REQUIRE(std::abs(out.x.squaredNorm() - in.p_t) < 1e-12);

  SECTION("K=1 matched direction") {
    detail::Instance one = inst_of(rng, 8, 1, 1.0, 20.0);
    SlpOutput o = zf_precode(one.input());
    Eigen::VectorXd hx1 = one.h_lift * o.x;
    Eigen::VectorXd s1 = lift_vector(one.cir.symbols);
    REQUIRE((hx1 - o.gamma(0) * s1).cwiseAbs().maxCoeff() < 1e-10);
  }
  SECTION("rank-deficient channel is rejected") {
    detail::Instance bad = inst_of(rng, 8, 2, 0.95, 20.0);
    bad.h_bar.row(1) = bad.h_bar.row(0);
    bad.h_lift = lift_channel(bad.h_bar);
    REQUIRE_THROWS(zf_precode(bad.input()));
  }
}

TEST_CASE("regularized precoder limits") {
  Rng rng(103);
  detail::Instance inst = inst_of(rng, 12, 5, 0.95, 20.0);
  SlpInput in = inst.input();

  SlpInput low_noise = in;
  low_noise.sigma2 = 1e-14;
  Eigen::VectorXd x_mmse = mmse_precode(low_noise).x;
  Eigen::VectorXd x_zf = zf_precode(in).x;
  double cosang = std::abs(x_mmse.dot(x_zf)) / (x_mmse.norm() * x_zf.norm());
  REQUIRE(std::acos(std::min(1.0, cosang)) < 1e-4);

  SlpInput high_noise = in;
  high_noise.sigma2 = 1e12;
  Eigen::VectorXd x_mf = mmse_precode(high_noise).x;
  Eigen::VectorXd matched = inst.h_lift.transpose() * lift_vector(inst.cir.symbols);
  cosang = std::abs(x_mf.dot(matched)) / (x_mf.norm() * matched.norm());
  REQUIRE(std::acos(std::min(1.0, cosang)) < 1e-4);

  REQUIRE(std::abs(mmse_precode(in).x.squaredNorm() - in.p_t) < 1e-12);
}

TEST_CASE("conventional balancing output lands in the scaled CIR") {
  Rng rng(107);
  detail::Instance inst = inst_of(rng, 10, 6, 1.0, 20.0);
  SlpInput in = inst.input();
  SlpOutput out = cisb_precode(in);
  REQUIRE(cir_residual(inst, out).minCoeff() >= -1e-8);
  // Noise-free rescaled receive point lies inside each user's cone.
  Eigen::VectorXd hx = inst.h_lift * out.x;
  for (int k = 0; k < 6; ++k) {
    cd z(hx(k) / out.gamma(k), hx(6 + k) / out.gamma(k));
    REQUIRE(in_cir(z, inst.cir.symbols(k), inst.cir.bounds[k], 1e-8));
  }
  // Dominance over the zero-forcing point, which is feasible for the program.
  SlpOutput zf = zf_precode(in);
  double zf_balanced = zf.gamma(0) * zf.gamma(0) / in.sigma2;
  REQUIRE(out.diag.objective >= zf_balanced - 1e-6 * zf_balanced);
}

TEST_CASE("robust balancing dominates and degenerates correctly") {
  Rng rng(109);
  detail::Instance aged = inst_of(rng, 10, 6, 0.95, 25.0);
  SlpInput in = aged.input();
  SlpOutput robust = cisb_r_precode(in);
  SlpOutput conv = cisb_precode(in);
  REQUIRE(robust.gamma.minCoeff() > 0.0);
  REQUIRE(gamma_min_metric(robust, in) >= gamma_min_metric(conv, in) - 1e-6);
  REQUIRE(cir_residual(aged, robust).minCoeff() >= -1e-8);

  detail::Instance quasi = inst_of(rng, 10, 6, 1.0, 25.0);
  SlpInput qin = quasi.input();
  SlpOutput a = cisb_r_precode(qin);
  SlpOutput b = cisb_precode(qin);
  REQUIRE(std::abs(a.diag.objective - b.diag.objective) <=
          1e-5 * std::abs(b.diag.objective));
}

TEST_CASE("closed-form balancing precoder") {
  Rng rng(113);
  SECTION("alpha = 1 collapses to scaled zero forcing") {
    detail::Instance inst = inst_of(rng, 12, 6, 1.0, 20.0);
    SlpInput in = inst.input();
    SlpOutput rlc = cisb_rlc_precode(in);
    SlpOutput zf = zf_precode(in);
    double cosang = std::abs(rlc.x.dot(zf.x)) / (rlc.x.norm() * zf.x.norm());
    REQUIRE(std::acos(std::min(1.0, cosang)) < 1e-6);
    REQUIRE(std::abs(rlc.x.squaredNorm() - in.p_t) < 1e-12);
  }
  SECTION("exact relaxation reduces to the pinned form when N >> K") {
    detail::Instance inst = inst_of(rng, 64, 4, 0.95, 20.0);
    SlpInput in = inst.input();
    SlpOutput pinned = cisb_rlc_precode(in);
    SlpOutput exact = closed_form_with_nnls(in);
    REQUIRE(exact.diag.delta.norm() <= 1e-8);
    REQUIRE((exact.x - pinned.x).norm() <= 1e-8 * pinned.x.norm());
  }
  SECTION("loaded system: relaxation only helps") {
    detail::Instance inst = inst_of(rng, 14, 12, 0.995, 25.0);
    SlpInput in = inst.input();
    SlpOutput pinned = cisb_rlc_precode(in);
    SlpOutput exact = closed_form_with_nnls(in);
    REQUIRE((exact.diag.delta.array() >= 0.0).all());
    REQUIRE(exact.diag.objective >= pinned.diag.objective - 1e-10);
    REQUIRE(cir_residual(inst, exact).minCoeff() >= -1e-8);
  }
}

TEST_CASE("alternating MMSE solver behavior") {
  Rng rng(127);
  detail::Instance inst = inst_of(rng, 64, 9, 0.95, 25.0, MaskProfile::shared_hotspots());
  SlpInput in = inst.input();

  SECTION("monotone objective and power") {
    SlpOutput out = cimmse_r_precode(in);
    for (size_t i = 1; i < out.diag.trace.size(); ++i)
      REQUIRE(out.diag.trace[i] <= out.diag.trace[i - 1] + 1e-9);
    REQUIRE(std::abs(out.x.squaredNorm() - in.p_t) < 1e-12 * in.p_t);
    REQUIRE(out.gamma.minCoeff() > 0.0);
    REQUIRE((out.diag.delta.array() >= -1e-15).all());
  }

  SECTION("restricted run equals the conventional baseline") {
    MmseOptions restricted;
    restricted.shared_psi = true;
    restricted.force_beta_zero = true;
    SlpOutput a = cimmse_r_precode(in, restricted);
    SlpOutput b = cimmse_precode(in);
    REQUIRE(std::abs(a.diag.objective - b.diag.objective) <=
            1e-5 * std::abs(b.diag.objective));
    REQUIRE((a.x - b.x).norm() <= 1e-10 * b.x.norm());
    // shared psi means a single common rescaling factor
    REQUIRE((b.gamma.array() - b.gamma(0)).abs().maxCoeff() < 1e-12 * b.gamma(0));
  }

  SECTION("low-complexity variant matches the direct regularized filter at beta=0") {
    MmseOptions one;
    one.max_iter = 1;
    one.force_beta_zero = true;
    SlpOutput rlc = cimmse_rlc_precode(in, one);
    // With psi = 1 the first filter is H^T (H H^T + kappa I)^{-1} with
    // kappa = K sigma^2 / P_T (Upsilon vanishes at beta = 0).
    double kappa = in.n_users() * in.sigma2 / in.p_t;
    Eigen::MatrixXd gram = inst.h_lift * inst.h_lift.transpose();
    gram.diagonal().array() += kappa;
    Eigen::VectorXd u = inst.h_lift.transpose() *
                        gram.llt().solve(lift_vector(inst.cir.symbols));
    Eigen::VectorXd x = std::sqrt(in.p_t) / u.norm() * u;
    double cosang = std::abs(x.dot(rlc.x)) / (x.norm() * rlc.x.norm());
    REQUIRE(std::acos(std::min(1.0, cosang)) < 1e-8);
  }

  SECTION("low-complexity gap: approximate filter does not beat the full one") {
    SlpOutput full = cimmse_r_precode(in);
    SlpOutput rlc = cimmse_rlc_precode(in);
    // Evaluate both under the full robust objective.
    double f_full = detail::mmse_objective(inst, full.x, full.diag.eta, full.diag.psi,
                                           full.diag.target);
    double f_rlc = detail::mmse_objective(inst, rlc.x, rlc.diag.eta, rlc.diag.psi,
                                          rlc.diag.target);
    REQUIRE(f_rlc >= f_full - 1e-9);
  }
}

TEST_CASE("gamma_min metric") {
  Rng rng(131);
  detail::Instance inst = inst_of(rng, 10, 4, 0.95, 20.0);
  SlpInput in = inst.input();
  SlpOutput out = cisb_rlc_precode(in);

  SECTION("beta = 0 reduces to gamma^2 / sigma^2") {
    SlpInput clean = in;
    clean.beta = Eigen::VectorXd::Zero(4);
    double expect = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 4; ++k)
      expect = std::min(expect, out.gamma(k) * out.gamma(k) / in.sigma2);
    REQUIRE(std::abs(gamma_min_metric(out, clean) - expect) < 1e-12 * expect);
  }
  SECTION("noise power monotonicity") {
    SlpInput noisier = in;
    noisier.sigma2 = 2.0 * in.sigma2;
    REQUIRE(gamma_min_metric(out, noisier) < gamma_min_metric(out, in));
  }
}

TEST_CASE("every scheme respects the power budget") {
  Rng rng(137);
  detail::Instance inst = inst_of(rng, 12, 6, 0.95, 20.0);
  SlpInput in = inst.input();
  for (auto* fn : {+[](const SlpInput& i) { return zf_precode(i); },
                   +[](const SlpInput& i) { return mmse_precode(i); },
                   +[](const SlpInput& i) { return cisb_precode(i, {}); },
                   +[](const SlpInput& i) { return cisb_r_precode(i, {}); },
                   +[](const SlpInput& i) { return cisb_rlc_precode(i); },
                   +[](const SlpInput& i) { return closed_form_with_nnls(i); },
                   +[](const SlpInput& i) { return cimmse_precode(i, {}); },
                   +[](const SlpInput& i) { return cimmse_r_precode(i, {}); },
                   +[](const SlpInput& i) { return cimmse_rlc_precode(i, {}); }}) {
    SlpOutput out = fn(in);
    REQUIRE(out.x.squaredNorm() <= in.p_t * (1.0 + 1e-8));
    REQUIRE(out.gamma.minCoeff() > 0.0);
  }
  // Balancing schemes transmit at exactly the budget.
  for (auto* fn : {+[](const SlpInput& i) { return cisb_precode(i, {}); },
                   +[](const SlpInput& i) { return cisb_r_precode(i, {}); },
                   +[](const SlpInput& i) { return cisb_rlc_precode(i); }}) {
    SlpOutput out = fn(in);
    REQUIRE(std::abs(out.x.squaredNorm() - in.p_t) <= 1e-8 * in.p_t);
  }
}
