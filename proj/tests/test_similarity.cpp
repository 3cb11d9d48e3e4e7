#include <doctest.h>

#include "bae/hungarian.hpp"
#include "bae/oracle.hpp"
#include "bae/similarity.hpp"
#include "test_util.hpp"

#include <numeric>

using namespace bae;
using bae::testing::random_factors;

TEST_CASE("frobenius similarity") {
  std::mt19937_64 rng(1);
  const Factors a = random_factors(rng, 4, 6);

  SUBCASE("self similarity is one") { CHECK(frobenius_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-12)); }
  SUBCASE("scaling the operator") {
    // Scaling l and r by c scales B^T B by c^4.
    Factors s = a;
    s.left *= std::sqrt(2.0);
    s.right *= std::sqrt(2.0);
    CHECK(frobenius_similarity(a, s) == doctest::Approx(8.0 / 17.0).epsilon(1e-12));
    s = a;
    s.left *= std::pow(2.0, 0.25);
    s.right *= std::pow(2.0, 0.25);
    CHECK(frobenius_similarity(a, s) == doctest::Approx(0.8).epsilon(1e-12));
  }
  SUBCASE("symmetric and oracle-equal") {
    const Factors b = random_factors(rng, 4, 9);
    CHECK(frobenius_similarity(a, b) == doctest::Approx(frobenius_similarity(b, a)).epsilon(1e-14));
    CHECK(frobenius_similarity(a, b) == doctest::Approx(oracle::frobenius_similarity(a, b)).epsilon(1e-10));
  }
  SUBCASE("invariant to orthogonal mixing of encoder rows") {
    // Row permutations and sign flips are the orthogonal maps of B that keep
    // every row a rank-1 bilinear form.
    Factors b = a;
    std::vector<Eigen::Index> perm{3, 0, 5, 1, 4, 2};
    for (Eigen::Index i = 0; i < 6; ++i) {
      b.left.row(i) = a.left.row(perm[static_cast<std::size_t>(i)]);
      b.right.row(i) = a.right.row(perm[static_cast<std::size_t>(i)]);
    }
    b.left.row(2) *= -1.0;
    const Factors c = random_factors(rng, 4, 5);
    CHECK(frobenius_similarity(b, c) == doctest::Approx(frobenius_similarity(a, c)).epsilon(1e-12));
    CHECK(frobenius_similarity(a, b) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("different input sizes are rejected") {
    CHECK_THROWS_AS(frobenius_similarity(a, random_factors(rng, 5, 6)), ShapeError);
  }
}

TEST_CASE("cross kernel") {
  std::mt19937_64 rng(2);
  const Factors a = random_factors(rng, 3, 4), b = random_factors(rng, 3, 5);
  const MatrixD c = cross_kernel(a, b);
  CHECK(c.rows() == 4);
  CHECK(c.cols() == 5);
  CHECK((c - oracle::encoder_matrix(a) * oracle::encoder_matrix(b).transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("permutation similarity recovers a planted permutation") {
  std::mt19937_64 rng(3);
  const BilinearModel a = bae::testing::to_model(random_factors(rng, 6, 10), Variant::vanilla);
  std::vector<std::size_t> perm(10);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  MatrixF l(10, 6), r(10, 6);
  for (std::size_t i = 0; i < 10; ++i) {
    l.row(static_cast<Eigen::Index>(perm[i])) = a.left().row(static_cast<Eigen::Index>(i));
    r.row(static_cast<Eigen::Index>(perm[i])) = a.right().row(static_cast<Eigen::Index>(i));
  }
  const BilinearModel b(Variant::vanilla, l, r);
  const PermutationSimilarity p = permutation_similarity(a, b);
  CHECK(p.permutation == perm);
  CHECK(frobenius_similarity(a, b) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(permutation_csv(p).rfind("latent_a,latent_b", 0) == 0);
}

TEST_CASE("permutation similarity of orthogonal latents is one") {
  Factors f;
  f.left = MatrixD::Identity(4, 4);
  f.right = MatrixD::Identity(4, 4);
  const BilinearModel m = bae::testing::to_model(f, Variant::vanilla);
  const PermutationSimilarity p = permutation_similarity(m, m);
  CHECK(p.value == doctest::Approx(1.0));
  CHECK(p.permutation == std::vector<std::size_t>{0, 1, 2, 3});
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(permutation_similarity(f, random_factors(rng, 4, 3)), ShapeError);
}

TEST_CASE("self similarity diagonal") {
  Factors f;
  f.left = MatrixD::Identity(3, 3);
  f.right = MatrixD::Identity(3, 3);
  const SelfSimilarity iso = self_similarity_diagonal(bae::testing::to_model(f, Variant::vanilla));
  for (double v : iso.per_latent) CHECK(v == doctest::Approx(1.0));
  CHECK(iso.global == doctest::Approx(1.0));

  f.left.row(1) = f.left.row(0);
  f.right.row(1) = f.right.row(0);
  const SelfSimilarity dup = self_similarity_diagonal(bae::testing::to_model(f, Variant::vanilla));
  CHECK(dup.per_latent[0] < 1.0);
  CHECK(dup.per_latent[0] == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(dup.per_latent[2] == doctest::Approx(1.0));

  f.left.row(2).setZero();
  CHECK(std::isnan(self_similarity_diagonal(bae::testing::to_model(f, Variant::vanilla)).per_latent[2]));
}

TEST_CASE("assignment solver") {
  MatrixD cost(3, 3);
  cost << 4, 1, 3, 2, 0, 5, 3, 2, 2;
  CHECK(solve_assignment_min(cost) == std::vector<std::size_t>{1, 0, 2});
  CHECK(solve_assignment_max(-cost) == std::vector<std::size_t>{1, 0, 2});

  // Brute force over all permutations of random 6x6 problems.
  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    const MatrixD c = bae::testing::gaussian(rng, 6, 6);
    std::vector<std::size_t> p(6);
    std::iota(p.begin(), p.end(), 0);
    double best = 1e300;
    do {
      double s = 0;
      for (std::size_t i = 0; i < 6; ++i) s += c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p[i]));
      best = std::min(best, s);
    } while (std::next_permutation(p.begin(), p.end()));
    const auto got = solve_assignment_min(c);
    double s = 0;
    for (std::size_t i = 0; i < 6; ++i) s += c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(got[i]));
    CHECK(s == doctest::Approx(best).epsilon(1e-12));
  }
  CHECK_THROWS_AS(solve_assignment_min(MatrixD::Ones(2, 3)), ShapeError);
}
