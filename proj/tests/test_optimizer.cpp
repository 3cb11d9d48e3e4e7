#include <doctest.h>

#include "bae/optimizer.hpp"
#include "test_util.hpp"

#include <Eigen/SVD>

using namespace bae;

namespace {

VectorD singular_values(const MatrixD& m) { return Eigen::JacobiSVD<MatrixD>(m).singularValues(); }

}  // namespace

TEST_CASE("orthogonalize keeps a semi-orthogonal matrix") {
  const MatrixD g = semi_orthogonal(3, 7, 11);
  CHECK((orthogonalize(g) - g).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("orthogonalize flattens the spectrum") {
  MatrixD g = MatrixD::Zero(2, 2);
  g(0, 0) = 2.0;
  g(1, 1) = 0.5;
  CHECK((orthogonalize(g) - MatrixD::Identity(2, 2)).cwiseAbs().maxCoeff() < 0.05);

  std::mt19937_64 rng(1);
  for (int t = 0; t < 50; ++t) {
    const VectorD s = singular_values(orthogonalize(bae::testing::gaussian(rng, 1 + t % 9, 1 + (t / 9) % 7)));
    CHECK(s.minCoeff() >= 0.7);
    CHECK(s.maxCoeff() <= 1.3);
  }
}

TEST_CASE("orthogonalize edge cases") {
  CHECK(orthogonalize(MatrixD::Zero(3, 5)) == MatrixD::Zero(3, 5));
  MatrixD bad = MatrixD::Ones(2, 2);
  bad(0, 1) = std::nan("");
  CHECK_THROWS_AS(orthogonalize(bad), std::invalid_argument);
  CHECK_THROWS_AS(orthogonalize(MatrixD::Ones(2, 2), 0), ConfigError);
}

TEST_CASE("orthogonalize commutes with transposition") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 10; ++t) {
    const MatrixD g = bae::testing::gaussian(rng, 1 + t % 5, 1 + t % 3 + t % 2);
    CHECK(orthogonalize(MatrixD(g.transpose())) == MatrixD(orthogonalize(g).transpose()));
  }
}

TEST_CASE("orthogonalize is deterministic") {
  std::mt19937_64 rng(3);
  const MatrixD g = bae::testing::gaussian(rng, 6, 4);
  CHECK(orthogonalize(g) == orthogonalize(g));
}

TEST_CASE("learning-rate schedule") {
  OptimConfig c;
  c.lr = 0.02;
  c.steps = 1000;
  c.warmup_frac = 0.5;
  CHECK(lr_at(0, c) == 0.02);
  CHECK(lr_at(499, c) == 0.02);
  CHECK(lr_at(750, c) == doctest::Approx(0.01));
  CHECK(lr_at(999, c) == doctest::Approx(0.02 / 500));
  CHECK_THROWS_AS(lr_at(1000, c), std::out_of_range);
}

TEST_CASE("alpha ramp") {
  OptimConfig c;
  c.alpha_warmup_steps = 256;
  CHECK(alpha_at(0, 0.4, c) == 0.0);
  CHECK(alpha_at(128, 0.4, c) == doctest::Approx(0.2));
  CHECK(alpha_at(5000, 0.4, c) == 0.4);
  c.alpha_warmup_steps = 0;
  CHECK(alpha_at(0, 0.4, c) == 0.4);
}

TEST_CASE("config validation") {
  OptimConfig c;
  c.lr = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.warmup_frac = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("update step") {
  MatrixF p = MatrixF::Ones(4, 2);
  const MatrixF before = p;
  apply_update(p, MatrixD::Zero(4, 2), 0.1, 5);
  CHECK(p == before);
  CHECK_THROWS_AS(apply_update(p, MatrixD::Zero(2, 4), 0.1, 5), ShapeError);

  // A rank-one gradient moves the parameter by lr * shape_scale along its sign.
  MatrixD g = MatrixD::Zero(4, 2);
  g(1, 0) = 3.0;
  apply_update(p, g, 0.1, 5);
  CHECK(p(1, 0) == doctest::Approx(1.0 - 0.1 * std::sqrt(2.0)).epsilon(1e-3));
  CHECK(shape_scale(4, 2) == doctest::Approx(std::sqrt(2.0)));
  CHECK(shape_scale(3, 3) == 1.0);
}
