#include <doctest.h>

#include "bae/model.hpp"
#include "bae/oracle.hpp"
#include "test_util.hpp"

#include <fstream>

using namespace bae;

TEST_CASE("encode computes (l.x)(r.x)") {
  std::mt19937_64 rng(1);
  const Factors f = bae::testing::random_factors(rng, 5, 7, 3);
  const MatrixD x = bae::testing::unit_rows(rng, 4, 5);
  const LatentActivations a = encode(f, x);
  CHECK((a.f - oracle::encode(f, x)).cwiseAbs().maxCoeff() < 1e-12);
  REQUIRE(a.g.has_value());
  CHECK((*a.g - a.f * f.mix->transpose()).cwiseAbs().maxCoeff() < 1e-12);
  const MatrixD form = latent_form(f, 2);
  CHECK(x.row(1).dot(form * x.row(1).transpose()) == doctest::Approx(a.f(1, 2)));
}

TEST_CASE("orthogonal initialisation") {
  const BilinearModel m = BilinearModel::orthogonal({6, 15, 4}, Variant::mixed, 9);
  CHECK(m.d_lat() == 15);
  CHECK(m.mix()->rows() == 4);
  const MatrixD l = m.left().cast<double>();
  CHECK((l.topRows(6) * l.topRows(6).transpose() - MatrixD::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(m == BilinearModel::orthogonal({6, 15, 4}, Variant::mixed, 9));
  CHECK(!(m == BilinearModel::orthogonal({6, 15, 4}, Variant::mixed, 10)));
  CHECK_THROWS_AS(BilinearModel::orthogonal({6, 15, std::nullopt}, Variant::mixed, 0), ConfigError);
  CHECK_THROWS_AS(BilinearModel::orthogonal({6, 3, 4}, Variant::mixed, 0), ConfigError);
  CHECK_THROWS_AS(BilinearModel::orthogonal({0, 3, std::nullopt}, Variant::vanilla, 0), ConfigError);
}

TEST_CASE("constructor checks invariants") {
  CHECK_THROWS_AS(BilinearModel(Variant::vanilla, MatrixF::Ones(3, 2), MatrixF::Ones(3, 3)), ShapeError);
  CHECK_THROWS_AS(BilinearModel(Variant::mixed, MatrixF::Ones(3, 2), MatrixF::Ones(3, 2)), VariantError);
  CHECK_THROWS_AS(BilinearModel(Variant::vanilla, MatrixF::Ones(3, 2), MatrixF::Ones(3, 2), MatrixF::Ones(1, 3)),
                  VariantError);
}

TEST_CASE("checkpoint round trip") {
  const auto dir = bae::testing::scratch_dir("model");
  for (Variant v : {Variant::vanilla, Variant::ordered, Variant::mixed, Variant::combined}) {
    const ModelDims dims{5, 8, has_mixer(v) ? std::optional<std::size_t>(3) : std::nullopt};
    const BilinearModel m = BilinearModel::orthogonal(dims, v, 4);
    const auto path = dir / (to_string(v) + ".bae");
    save_checkpoint(m, path);
    CHECK(load_checkpoint(path) == m);
    const CheckpointHeader h = peek_checkpoint(path);
    CHECK(h.variant == v);
    CHECK(h.d_lat == 8);
  }
}

TEST_CASE("corrupt checkpoints are rejected") {
  const auto dir = bae::testing::scratch_dir("model_bad");
  const BilinearModel m = BilinearModel::orthogonal({4, 4, std::nullopt}, Variant::vanilla, 0);
  const auto path = dir / "m.bae";
  save_checkpoint(m, path);

  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto write = [&](const std::string& b) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(b.data(), static_cast<std::streamsize>(b.size()));
  };
  write("XXXX" + bytes.substr(4));
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  write(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  CHECK_THROWS(load_checkpoint(dir / "missing.bae"));
}

TEST_CASE("variant names") {
  for (Variant v : {Variant::vanilla, Variant::ordered, Variant::mixed, Variant::combined, Variant::topk}) {
    CHECK(parse_variant(to_string(v)) == v);
  }
  CHECK_THROWS_AS(parse_variant("dense"), VariantError);
}
