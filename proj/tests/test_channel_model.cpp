#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "slp/channel_model.hpp"

using namespace slp;

namespace {

// Independent oracle: J0 power series evaluated in extended precision until
// the terms vanish. Valid to full double accuracy for |x| <= 12, which covers
// every argument asserted below.
long double j0_series_oracle(long double x) {
  long double q = 0.25L * x * x;
  long double term = 1.0L, sum = 1.0L;
  for (int k = 1; k <= 80; ++k) {
    term *= -q / (static_cast<long double>(k) * k);
    sum += term;
    if (std::abs(term) < 1e-25L) break;
  }
  return sum;
}

}  // namespace

TEST_CASE("bessel_j0 matches the power-series oracle") {
  for (double x : {0.0, 0.3, 1.0, 2.199, 2.4048, 3.7, 5.5, 7.9, 8.0}) {
    double oracle = static_cast<double>(j0_series_oracle(x));
    REQUIRE(std::abs(bessel_j0(x) - oracle) <= 1e-7);
  }
  // Asymptotic branch spot checks (reference values, scipy.special.j0).
  REQUIRE(std::abs(bessel_j0(10.0) - (-0.245935764451348)) <= 1e-7);
  REQUIRE(std::abs(bessel_j0(15.0) - (-0.014224472826781)) <= 1e-7);
  // First zero of J0.
  REQUIRE(std::abs(bessel_j0(2.40482555769577)) < 1e-9);
}

TEST_CASE("jakes correlation endpoints and anchors") {
  MobilityProfile still;
  still.speed_mps = 0.0;
  for (int n : {0, 1, 7, 100}) REQUIRE(jakes_correlation(still, n) == 1.0);

  MobilityProfile moving;
  moving.speed_mps = 30.0;
  moving.carrier_hz = 3.5e9;
  // Choose T so that the Jakes argument equals 2.199 at n = 1.
  moving.symbol_duration_s = 2.199 * MobilityProfile::kLightSpeedMps /
                             (2.0 * M_PI * 30.0 * 3.5e9);
  double a = jakes_correlation(moving, 1);
  REQUIRE(std::abs(a - 0.1104) < 1e-3);  // coarse anchor
  REQUIRE(std::abs(a - static_cast<double>(j0_series_oracle(2.199L))) <= 1e-7);

  // n = 0 is exactly 1 for any profile.
  REQUIRE(jakes_correlation(moving, 0) == 1.0);

  // Argument at the first zero of J0.
  moving.symbol_duration_s = 2.4048 * MobilityProfile::kLightSpeedMps /
                             (2.0 * M_PI * 30.0 * 3.5e9);
  REQUIRE(std::abs(jakes_correlation(moving, 1)) < 1e-3);
}

TEST_CASE("dft grid shapes and column norms") {
  SECTION("N=2 unitary") {
    Eigen::MatrixXcd v = build_dft_grid(ArrayConfig::ula(2, 1));
    REQUIRE(v.rows() == 2);
    REQUIRE(v.cols() == 2);
    Eigen::MatrixXcd eye = v * v.adjoint();
    REQUIRE((eye - Eigen::MatrixXcd::Identity(2, 2)).norm() < 1e-12);
  }
  SECTION("N=14 paper ULA") {
    Eigen::MatrixXcd v = build_dft_grid(ArrayConfig::ula(14, 1));
    REQUIRE(v.rows() == 14);
    REQUIRE(v.cols() == 14);
    for (int j = 0; j < 14; ++j) REQUIRE(std::abs(v.col(j).norm() - 1.0) < 1e-12);
  }
  SECTION("N=4 oversampled") {
    Eigen::MatrixXcd v = build_dft_grid(ArrayConfig::ula(4, 2));
    REQUIRE(v.rows() == 4);
    REQUIRE(v.cols() == 8);
    Eigen::MatrixXcd gram = v.adjoint() * v;
    for (int j = 0; j < 8; ++j) REQUIRE(std::abs(gram(j, j).real() - 1.0) < 1e-12);
  }
  SECTION("UPA dual polarized") {
    ArrayConfig upa = ArrayConfig::upa(4, 8, 4, true);
    REQUIRE(upa.n_antennas == 64);
    Eigen::MatrixXcd v = build_dft_grid(upa);
    REQUIRE(v.rows() == 64);
    REQUIRE(v.cols() == 256);
    for (int j = 0; j < 256; ++j) REQUIRE(std::abs(v.col(j).norm() - 1.0) < 1e-12);
    // Polarization blocks do not mix.
    REQUIRE(v.topRightCorner(32, 128).norm() == 0.0);
    REQUIRE(v.bottomLeftCorner(32, 128).norm() == 0.0);
  }
  SECTION("invalid configs rejected") {
    ArrayConfig bad;
    bad.n_antennas = 0;
    REQUIRE_THROWS_AS(build_dft_grid(bad), std::invalid_argument);
    bad.n_antennas = 4;
    bad.fine_factor = 0;
    REQUIRE_THROWS_AS(build_dft_grid(bad), std::invalid_argument);
  }
}

TEST_CASE("angular masks: normalization, determinism, sparsity") {
  ArrayConfig array = ArrayConfig::ula(64, 4);
  SECTION("norm enforced") {
    Rng rng(7);
    Eigen::VectorXd m = synthesize_angular_mask(rng, 3, array);
    REQUIRE(std::abs(m.squaredNorm() - 64.0) < 1e-12);
    REQUIRE(m.minCoeff() >= 0.0);
  }
  SECTION("same seed, same mask") {
    Rng a(42), b(42);
    Eigen::VectorXd ma = synthesize_angular_mask(a, 3, array);
    Eigen::VectorXd mb = synthesize_angular_mask(b, 3, array);
    REQUIRE(ma == mb);
  }
  SECTION("single cluster is nearly one-hot") {
    Rng rng(3);
    Eigen::VectorXd m = synthesize_angular_mask(rng, 1, array);
    double peak = m.maxCoeff();
    long below = (m.array() < 0.01 * peak).count();
    REQUIRE(below >= long(0.8 * m.size()));
  }
  SECTION("sparsity contract at n_clusters <= 3") {
    for (auto cfg : {ArrayConfig::ula(64, 4), ArrayConfig::ula(32, 1)}) {
      Rng rng(11);
      for (int rep = 0; rep < 20; ++rep) {
        Eigen::VectorXd m = synthesize_angular_mask(rng, 3, cfg);
        double peak = m.maxCoeff();
        long below = (m.array() < 0.01 * peak).count();
        REQUIRE(below >= long(0.8 * m.size()));
      }
    }
  }
  SECTION("shared-hotspot set keeps the contract and the norm") {
    Rng rng(5);
    auto masks = synthesize_mask_set(rng, 9, 3, ArrayConfig::upa(4, 8, 4, true),
                                     MaskProfile::shared_hotspots());
    REQUIRE(masks.size() == 9);
    for (const auto& m : masks) {
      REQUIRE(std::abs(m.squaredNorm() - 64.0) < 1e-12);
      long below = (m.array() < 0.01 * m.maxCoeff()).count();
      REQUIRE(below >= long(0.8 * m.size()));
    }
  }
}

TEST_CASE("estimated channel draws") {
  ArrayConfig array = ArrayConfig::ula(14, 1);
  Rng mask_rng(2);
  auto model = AngularChannelModel::make(
      array, synthesize_mask_set(mask_rng, 1, 3, array, MaskProfile::independent()),
      Eigen::VectorXd::Constant(1, 0.95));

  SECTION("zero mask gives zero channel") {
    AngularChannelModel zero = model;
    zero.masks[0].setZero();
    Rng rng(1);
    REQUIRE(sample_estimated_channel(zero, 0, rng).norm() == 0.0);
  }
  SECTION("ensemble power matches the mask norm") {
    Rng rng(9);
    double acc = 0.0;
    const int n_draws = 10000;
    for (int i = 0; i < n_draws; ++i)
      acc += sample_estimated_channel(model, 0, rng).squaredNorm();
    REQUIRE(std::abs(acc / n_draws - 14.0) < 0.05 * 14.0);
  }
  SECTION("one-hot mask gives a scaled steering column") {
    AngularChannelModel hot = model;
    hot.masks[0].setZero();
    hot.masks[0](3) = std::sqrt(14.0);
    Rng rng(4);
    Eigen::VectorXcd h = sample_estimated_channel(hot, 0, rng);
    // h = sqrt(N) g v3*, so every entry has the same modulus |g|.
    double mod = std::abs(h(0));
    for (int i = 1; i < h.size(); ++i) REQUIRE(std::abs(std::abs(h(i)) - mod) < 1e-12);
  }
}

TEST_CASE("true-channel evolution") {
  ArrayConfig array = ArrayConfig::ula(14, 1);
  Rng mask_rng(13);
  auto masks = synthesize_mask_set(mask_rng, 1, 3, array, MaskProfile::independent());
  Eigen::MatrixXcd grid = build_dft_grid(array);
  Rng rng(17);
  auto model = AngularChannelModel::make(array, masks, Eigen::VectorXd::Constant(1, 0.95));
  Eigen::VectorXcd h_u = sample_estimated_channel(model, 0, rng);

  SECTION("alpha bounds enforced") {
    REQUIRE_THROWS_AS(evolve_true_channel(grid, masks[0], h_u, -0.1, rng),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(evolve_true_channel(grid, masks[0], h_u, 1.1, rng),
                      std::invalid_argument);
  }
  SECTION("quasi-static limit") {
    Eigen::VectorXcd h = evolve_true_channel(grid, masks[0], h_u, 1.0, rng);
    REQUIRE((h - h_u).norm() == 0.0);
  }
  SECTION("alpha=0 decorrelates from the estimate") {
    std::complex<double> corr = 0.0;
    double nh = 0.0;
    const int n_draws = 10000;
    for (int i = 0; i < n_draws; ++i) {
      Eigen::VectorXcd h = evolve_true_channel(grid, masks[0], h_u, 0.0, rng);
      corr += h_u.dot(h);
      nh += h.squaredNorm();
    }
    REQUIRE(std::abs(corr) / (h_u.norm() * std::sqrt(nh * n_draws)) *
                std::sqrt(static_cast<double>(n_draws)) <
            0.05 * std::sqrt(static_cast<double>(n_draws)));
  }
  SECTION("power conservation at alpha=0.95") {
    // Ensemble expectation over both the estimate and the innovation.
    double acc = 0.0;
    const int n_draws = 10000;
    for (int i = 0; i < n_draws; ++i) {
      Eigen::VectorXcd hu = sample_estimated_channel(model, 0, rng);
      acc += evolve_true_channel(grid, masks[0], hu, 0.95, rng).squaredNorm();
    }
    REQUIRE(std::abs(acc / n_draws - 14.0) < 0.05 * 14.0);
  }
}

TEST_CASE("ensemble normalization: E tr(H H^H) = K N at alpha = 1") {
  ArrayConfig array = ArrayConfig::ula(14, 1);
  const int k_users = 4;
  Rng mask_rng(23);
  auto model = AngularChannelModel::make(
      array, synthesize_mask_set(mask_rng, k_users, 3, array, MaskProfile::independent()),
      Eigen::VectorXd::Constant(k_users, 1.0));
  Rng rng(29);
  double acc = 0.0;
  const int n_draws = 3000;
  for (int i = 0; i < n_draws; ++i) {
    PosterioriRealization r = draw_posteriori(model, rng);
    for (int k = 0; k < k_users; ++k) acc += r.true_channel[k].squaredNorm();
  }
  REQUIRE(std::abs(acc / n_draws - 14.0 * k_users) < 0.05 * 14.0 * k_users);
}

TEST_CASE("posteriori realization identities and reproducibility") {
  ArrayConfig array = ArrayConfig::ula(8, 2);
  Rng mask_rng(31);
  auto model = AngularChannelModel::make(
      array, synthesize_mask_set(mask_rng, 3, 2, array, MaskProfile::independent()),
      Eigen::VectorXd::Constant(3, 0.9));
  Rng a(5), b(5);
  PosterioriRealization ra = draw_posteriori(model, a);
  PosterioriRealization rb = draw_posteriori(model, b);
  for (int k = 0; k < 3; ++k) {
    REQUIRE(ra.true_channel[k] == rb.true_channel[k]);  // bit identical
    REQUIRE((ra.mean[k] - 0.9 * ra.estimated[k]).norm() == 0.0);
    Eigen::VectorXcd rebuilt = ra.mean[k] +
        model.beta(k) * (model.dft_grid.conjugate() *
                         (model.masks[k].array() * ra.innovation[k].array()).matrix());
    REQUIRE((ra.true_channel[k] - rebuilt).norm() < 1e-14);
  }
}
