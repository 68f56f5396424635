#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>

#include "slp/channel_model.hpp"
#include "slp/real_lift.hpp"
#include "slp/rng.hpp"

using namespace slp;

namespace {

Eigen::MatrixXcd random_cmatrix(Rng& rng, int r, int c) {
  Eigen::MatrixXcd m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.cnormal();
  return m;
}

}  // namespace

TEST_CASE("lift block patterns") {
  const int n = 3;
  Eigen::MatrixXcd eye = Eigen::MatrixXcd::Identity(n, n);
  Eigen::MatrixXd lr = lift_channel(eye);
  REQUIRE((lr - Eigen::MatrixXd::Identity(2 * n, 2 * n)).norm() == 0.0);

  Eigen::MatrixXd li = lift_channel(std::complex<double>(0, 1) * eye);
  Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  expect.topRightCorner(n, n) = -Eigen::MatrixXd::Identity(n, n);
  expect.bottomLeftCorner(n, n) = Eigen::MatrixXd::Identity(n, n);
  REQUIRE((li - expect).norm() == 0.0);
}

TEST_CASE("lift is a multiplication homomorphism and an isometry") {
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::MatrixXcd hc = random_cmatrix(rng, 4, 6);
    Eigen::VectorXcd xc = random_cmatrix(rng, 6, 1);
    Eigen::VectorXd lhs = lift_channel(hc) * lift_vector(xc);
    Eigen::VectorXd rhs = lift_vector(hc * xc);
    REQUIRE((lhs - rhs).norm() < 1e-12);
    REQUIRE(std::abs(lift_vector(xc).squaredNorm() - xc.squaredNorm()) <
            1e-12 * xc.squaredNorm());
    REQUIRE((unlift_vector(lift_vector(xc)) - xc).norm() == 0.0);
  }
}

TEST_CASE("uncertainty operator identities") {
  ArrayConfig array = ArrayConfig::ula(16, 2);
  Eigen::MatrixXcd grid = build_dft_grid(array);
  Rng rng(11);

  SECTION("zero mask") {
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(array.grid_length());
    REQUIRE(build_uncertainty(zero, grid).e.norm() == 0.0);
  }

  SECTION("trace, isometry, symmetry, psd") {
    for (int rep = 0; rep < 5; ++rep) {
      Eigen::VectorXd m = synthesize_angular_mask(rng, 3, array);
      UncertaintyOperator op = build_uncertainty(m, grid);
      double tr = op.e.trace();
      REQUIRE(std::abs(tr - 2.0 * m.squaredNorm()) < 1e-10 * std::abs(tr));
      REQUIRE((op.e - op.e.transpose()).norm() == 0.0);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(op.e);
      REQUIRE(eig.eigenvalues().minCoeff() >= -1e-10);

      Eigen::VectorXcd xc = random_cmatrix(rng, array.n_antennas, 1);
      double real_side = (op.v_real * lift_vector(xc)).squaredNorm();
      double cplx_side = (op.v_bar * xc).squaredNorm();
      REQUIRE(std::abs(real_side - cplx_side) < 1e-12 * cplx_side);
      // e = v_real^T v_real up to rounding
      REQUIRE((op.e - op.v_real.transpose() * op.v_real).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("diagonal dominance of the uncertainty gram") {
  Rng rng(17);
  SECTION("flat mask diagonalizes at fine factor 1") {
    ArrayConfig array = ArrayConfig::ula(16, 1);
    Eigen::MatrixXcd grid = build_dft_grid(array);
    Eigen::VectorXd flat = Eigen::VectorXd::Constant(16, 1.0);
    flat *= std::sqrt(16.0) / flat.norm();
    UncertaintyOperator op = build_uncertainty(flat, grid);
    DominanceReport rep = diagonal_dominance_report(op.e);
    REQUIRE(rep.offdiag_mass < 1e-10);
    REQUIRE(rep.dominant);
  }
  SECTION("one-hot mask") {
    ArrayConfig array = ArrayConfig::ula(16, 1);
    Eigen::MatrixXcd grid = build_dft_grid(array);
    Eigen::VectorXd m = Eigen::VectorXd::Zero(16);
    m(5) = 4.0;
    DominanceReport rep = diagonal_dominance_report(build_uncertainty(m, grid).e);
    REQUIRE(rep.dominant);
  }
  SECTION("random masks keep row dominance exactly") {
    ArrayConfig array = ArrayConfig::ula(16, 2);
    Eigen::MatrixXcd grid = build_dft_grid(array);
    for (int rep_i = 0; rep_i < 10; ++rep_i) {
      Eigen::VectorXd m = synthesize_angular_mask(rng, 3, array);
      DominanceReport rep = diagonal_dominance_report(build_uncertainty(m, grid).e);
      REQUIRE(rep.dominant);
      REQUIRE(rep.max_offdiag_ratio <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("spherical stand-in matches the trace") {
  ArrayConfig array = ArrayConfig::ula(16, 2);
  Rng rng(23);
  Eigen::VectorXd m = synthesize_angular_mask(rng, 2, array);
  DiagonalApprox d = DiagonalApprox::from_mask(m, array.n_antennas);
  // tr(scale * I_{2N}) = 2 ||m||^2
  REQUIRE(std::abs(d.scale * 2 * array.n_antennas - 2.0 * m.squaredNorm()) < 1e-12);
}
