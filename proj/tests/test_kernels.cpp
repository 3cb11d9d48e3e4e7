#include <doctest.h>

#include "bae/kernels.hpp"
#include "bae/oracle.hpp"
#include "test_util.hpp"

#include <Eigen/Eigenvalues>

using namespace bae;
using bae::testing::random_factors;

TEST_CASE("identity factors give identity kernel") {
  Factors f;
  f.left = MatrixD::Identity(4, 4);
  f.right = MatrixD::Identity(4, 4);
  CHECK(plain_kernel(f).K.isApprox(MatrixD::Identity(4, 4)));
}

TEST_CASE("kernel diagonal is |l|^2 |r|^2 and matches the oracle") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const Factors f = random_factors(rng, 2 + t % 6, 1 + t % 11);
    const MatrixD k = plain_kernel(f).K;
    for (Eigen::Index i = 0; i < k.rows(); ++i) {
      CHECK(k(i, i) == doctest::Approx(f.left.row(i).squaredNorm() * f.right.row(i).squaredNorm()).epsilon(1e-12));
    }
    CHECK((k - oracle::kernel(f)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(k == k.transpose());
  }
}

TEST_CASE("plain kernel is positive semi-definite") {
  std::mt19937_64 rng(4);
  const Factors f = random_factors(rng, 5, 12);
  const VectorD ev = Eigen::SelfAdjointEigenSolver<MatrixD>(plain_kernel(f).K).eigenvalues();
  CHECK(ev.minCoeff() > -1e-10);
}

TEST_CASE("mixed kernel") {
  std::mt19937_64 rng(5);
  Factors f = random_factors(rng, 4, 6);
  const MatrixD k = plain_kernel(f).K;

  SUBCASE("identity mixer reproduces the plain kernel") {
    f.mix = MatrixD::Identity(6, 6);
    CHECK((mixed_kernel(f, 4).K - k).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("zero mixer row gives zero row and column") {
    f.mix = bae::testing::gaussian(rng, 3, 6);
    f.mix->row(1).setZero();
    const MatrixD km = mixed_kernel(f, 2).K;
    CHECK(km.row(1).cwiseAbs().maxCoeff() == 0.0);
    CHECK(km.col(1).cwiseAbs().maxCoeff() == 0.0);
    CHECK((km - *f.mix * k * f.mix->transpose()).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("result does not depend on block size") {
    f.mix = bae::testing::gaussian(rng, 5, 6);
    const MatrixD ref = mixed_kernel(f, 512).K;
    for (std::size_t b : {1, 2, 3, 5}) CHECK((mixed_kernel(f, b).K - ref).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("needs a mixer") { CHECK_THROWS_AS(mixed_kernel(f), VariantError); }
}

TEST_CASE("ordered mask for three uniform latents") {
  const OrderedMask m = ordered_mask(3, uniform_prefix_weights(3));
  MatrixD expect(3, 3);
  expect << 1, 2.0 / 3, 1.0 / 3, 2.0 / 3, 2.0 / 3, 1.0 / 3, 1.0 / 3, 1.0 / 3, 1.0 / 3;
  CHECK((m.W - expect).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(m.W.row(2).maxCoeff() == m.W.row(2).minCoeff());
  CHECK(m.W == m.W.transpose());
}

TEST_CASE("ordered mask matches direct summation over prefixes") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int n = 1; n < 12; ++n) {
    VectorD w(n);
    for (int i = 0; i < n; ++i) w(i) = u(rng);
    CHECK((ordered_mask(n, w).W - oracle::prefix_mask(w)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("negative prefix weights are rejected") {
  VectorD w(3);
  w << 0.5, -0.1, 0.6;
  CHECK_THROWS_AS(prefix_coefficients(w), ConfigError);
  CHECK_THROWS_AS(ordered_mask(2, uniform_prefix_weights(3)), ShapeError);
}

TEST_CASE("blocked quadratic form") {
  std::mt19937_64 rng(7);
  const Factors f = random_factors(rng, 5, 13);
  const MatrixD x = bae::testing::unit_rows(rng, 9, 5);
  const MatrixD lat = oracle::encode(f, x);
  const MatrixD k = plain_kernel(f).K;
  const VectorD full = (lat * k).cwiseProduct(lat).rowwise().sum();
  const PlainKernelTiles tiles(f.left, f.right);

  SUBCASE("identity kernel gives |f|^2") {
    const MatrixD eye = MatrixD::Identity(13, 13);
    const DenseKernelTiles dense(eye);
    const VectorD q = blocked_quadratic_form(lat, dense, TileSchedule::make(13, 4));
    CHECK((q - lat.rowwise().squaredNorm()).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("any tile size agrees with the full double sum") {
    for (std::size_t b : {1, 2, 3, 6, 13, 40}) {
      const VectorD q = blocked_quadratic_form(lat, tiles, TileSchedule::make(13, b));
      CHECK((q - full).cwiseAbs().maxCoeff() < 1e-10 * full.cwiseAbs().maxCoeff());
    }
  }
  SUBCASE("masked form matches explicit K .* W") {
    const VectorD w = uniform_prefix_weights(13);
    const OrderedMask m = ordered_mask(13, w);
    const MatrixD kw = k.cwiseProduct(m.W);
    const VectorD ref = (lat * kw).cwiseProduct(lat).rowwise().sum();
    const VectorD q = blocked_quadratic_form(lat, tiles, TileSchedule::make(13, 5), &m.prefix);
    CHECK((q - ref).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("schedule covers the upper triangle once") {
    const TileSchedule s = TileSchedule::make(13, 4);
    CHECK(s.num_blocks() == 4);
    CHECK(s.pairs.size() == 10);
    CHECK(s.block_extent(3) == 1);
    CHECK_THROWS_AS(TileSchedule::make(13, 0), ConfigError);
  }
}
