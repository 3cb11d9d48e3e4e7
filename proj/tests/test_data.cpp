#include <doctest.h>

#include "bae/data.hpp"
#include "bae/io_util.hpp"
#include "test_util.hpp"

#include <fstream>
#include <functional>

using namespace bae;

namespace {

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const std::filesystem::path& p, const std::string& b) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(b.data(), static_cast<std::streamsize>(b.size()));
}

DumpError::Kind dump_error_kind(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const DumpError& e) {
    return e.kind();
  }
  FAIL("expected a DumpError");
  return DumpError::Kind::io;
}

}  // namespace

TEST_CASE("normalize") {
  MatrixD raw(3, 2);
  raw << 3, 4, 0, 0, -1, 0;
  const ActivationBatch b = normalize(raw, {"a", "b", "c"});
  REQUIRE(b.size() == 2);
  CHECK(b.rows(0, 0) == doctest::Approx(0.6));
  CHECK(b.rows(0, 1) == doctest::Approx(0.8));
  CHECK(b.dropped == 1);
  CHECK(b.tags == std::vector<std::string>{"a", "c"});
  CHECK_THROWS_AS(normalize(raw, {"a"}), ShapeError);
  raw(0, 0) = std::nan("");
  CHECK_THROWS_AS(normalize(raw), std::invalid_argument);
}

TEST_CASE("dump round trip and batching") {
  const auto dir = bae::testing::scratch_dir("dump");
  MatrixD raw(3, 2);
  raw << 3, 4, 1, 0, 0, -2;
  write_dump(dir / "a.bact", raw);
  CHECK(std::filesystem::file_size(dir / "a.bact") == kDumpHeaderBytes + 3 * 2 * 4);

  const DumpHeader h = read_dump_header(dir / "a.bact");
  CHECK(h.d_in == 2);
  CHECK(h.n_rows == 3);

  const auto batches = load_dump(dir / "a.bact", 2);
  REQUIRE(batches.size() == 2);
  CHECK(batches[0].size() == 2);
  CHECK(batches[1].size() == 1);
  CHECK(batches[0].rows(0, 1) == doctest::Approx(0.8));
  CHECK(batches[1].rows(0, 1) == doctest::Approx(-1.0));

  DumpReader reader(dir / "a.bact");
  reader.set_range(1, 3);
  const MatrixF rows = reader.next_raw(10);
  CHECK(rows.rows() == 2);
  CHECK(rows(1, 1) == -2.0f);
  CHECK(reader.next_raw(10).rows() == 0);
  reader.rewind();
  CHECK(reader.next_raw(1)(0, 0) == 1.0f);
  CHECK_THROWS_AS(reader.set_range(2, 4), std::out_of_range);
}

TEST_CASE("dump errors carry their kind") {
  const auto dir = bae::testing::scratch_dir("dump_bad");
  const auto path = dir / "a.bact";
  write_dump(path, MatrixD(MatrixD::Ones(4, 3)));
  const std::string good = read_bytes(path);
  const auto load = [&] { load_dump(path, 2); };

  write_bytes(path, "NOPE" + good.substr(4));
  CHECK(dump_error_kind(load) == DumpError::Kind::bad_magic);

  std::string b = good;
  b[4] = 9;
  write_bytes(path, b);
  CHECK(dump_error_kind(load) == DumpError::Kind::version_mismatch);

  b = good;
  b[20] = 7;
  write_bytes(path, b);
  CHECK(dump_error_kind(load) == DumpError::Kind::bad_dtype);

  write_bytes(path, good.substr(0, good.size() - 5));
  CHECK(dump_error_kind(load) == DumpError::Kind::truncated);
  write_bytes(path, good.substr(0, 10));
  CHECK(dump_error_kind(load) == DumpError::Kind::truncated);

  write_bytes(path, good);
  CHECK(dump_error_kind([&] { load_dump(path, 2, 5); }) == DumpError::Kind::dim_mismatch);
  CHECK(dump_error_kind([&] { load_dump(dir / "absent.bact", 2); }) == DumpError::Kind::io);
  CHECK_THROWS_AS(load_dump(path, 0), ConfigError);
}

TEST_CASE("synthetic data") {
  SUBCASE("deterministic in the seed") {
    SyntheticSpec s;
    s.seed = 5;
    const SyntheticData a = generate(s, 100), b = generate(s, 100);
    CHECK(a.raw == b.raw);
    s.seed = 6;
    CHECK(!(generate(s, 100).raw == a.raw));
  }
  SUBCASE("superposed directions are unit and spread out") {
    SyntheticSpec s;
    const SyntheticData d = generate(s, 50);
    CHECK(d.truth.directions.rows() == 24);
    CHECK((d.truth.directions.rowwise().norm().array() - 1.0).abs().maxCoeff() < 1e-9);
    MatrixD g = d.truth.directions * d.truth.directions.transpose();
    g.diagonal().setZero();
    CHECK(g.cwiseAbs().maxCoeff() < 0.6);
    CHECK((d.batch.rows.rowwise().norm().array() - 1.0).abs().maxCoeff() < 1e-12);
  }
  SUBCASE("noise-free circle stays in its plane") {
    SyntheticSpec s;
    s.kind = SyntheticKind::circle_manifold;
    s.d_in = 8;
    s.subspace = {2, 5};
    s.noise = 0.0;
    const SyntheticData d = generate(s, 200);
    for (Eigen::Index c = 0; c < 8; ++c) {
      if (c == 2 || c == 5) continue;
      CHECK(d.raw.col(c).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK(d.truth.subspace == std::vector<std::size_t>{2, 5});
  }
  SUBCASE("every kind generates finite unit rows") {
    for (auto kind : {SyntheticKind::superposed_sparse, SyntheticKind::circle_manifold, SyntheticKind::sphere_manifold,
                      SyntheticKind::clustered_directions, SyntheticKind::gaussian_noise}) {
      SyntheticSpec s;
      s.kind = kind;
      s.d_in = 6;
      if (kind == SyntheticKind::circle_manifold) s.subspace = {0, 1};
      if (kind == SyntheticKind::sphere_manifold) s.subspace = {0, 1, 2};
      const SyntheticData d = generate(s, 64);
      CHECK(d.batch.rows.allFinite());
      CHECK(d.batch.size() + d.batch.dropped == 64);
      CHECK(parse_synthetic_kind(to_string(kind)) == kind);
    }
  }
  SUBCASE("invalid specs") {
    SyntheticSpec s;
    s.kind = SyntheticKind::circle_manifold;
    s.subspace = {1};
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s.subspace = {1, 1};
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s.subspace = {1, 40};
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = {};
    s.sparsity = 0.0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    CHECK_THROWS_AS(parse_synthetic_kind("spiral"), ConfigError);
  }
  SUBCASE("active features per sample") {
    SyntheticSpec s;
    CHECK(s.active_per_sample() == 1);
    s.sparsity = 0.1;
    CHECK(s.active_per_sample() == 2);
  }
}

TEST_CASE("tags sidecar") {
  const auto dir = bae::testing::scratch_dir("tags");
  write_dump(dir / "a.bact", MatrixD(MatrixD::Ones(2, 2)));
  CHECK(load_tags(dir / "a.bact").empty());
  io::atomic_write_text(dir / "a.bact.tags", "first\nsecond\n");
  CHECK(load_tags(dir / "a.bact") == std::vector<std::string>{"first", "second"});
}
