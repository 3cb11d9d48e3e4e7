#include "bae/data.hpp"

#include "bae/io_util.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>

namespace bae {

namespace {

using Index = Eigen::Index;

constexpr char kDumpMagic[4] = {'B', 'A', 'C', 'T'};

}  // namespace

ActivationBatch normalize(const MatrixD& raw, std::vector<std::string> tags) {
  if (!raw.allFinite()) throw std::invalid_argument("normalize: non-finite input entries");
  if (!tags.empty() && tags.size() != static_cast<std::size_t>(raw.rows())) {
    throw ShapeError("tag count does not match row count");
  }
  std::vector<Index> keep;
  keep.reserve(static_cast<std::size_t>(raw.rows()));
  VectorD norms = raw.rowwise().norm();
  for (Index r = 0; r < raw.rows(); ++r) {
    if (norms(r) >= kMinRowNorm) keep.push_back(r);
  }
  ActivationBatch out;
  out.dropped = static_cast<std::size_t>(raw.rows()) - keep.size();
  out.rows.resize(static_cast<Index>(keep.size()), raw.cols());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    out.rows.row(static_cast<Index>(i)) = raw.row(keep[i]) / norms(keep[i]);
  }
  if (!tags.empty()) {
    out.tags.reserve(keep.size());
    for (const Index r : keep) out.tags.push_back(std::move(tags[static_cast<std::size_t>(r)]));
  }
  return out;
}

// --- dump ----------------------------------------------------------------------

void write_dump(const std::filesystem::path& path, const MatrixF& rows) {
  io::atomic_write(
      path,
      [&](std::ostream& out) {
        out.write(kDumpMagic, 4);
        io::write_le<std::uint32_t>(out, kDumpVersion);
        io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(rows.cols()));
        io::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(rows.rows()));
        io::write_le<std::uint8_t>(out, kDumpDtypeF32);
        io::write_f32_block(out, rows.data(), static_cast<std::size_t>(rows.size()));
      },
      /*binary=*/true);
}

void write_dump(const std::filesystem::path& path, const MatrixD& rows) {
  write_dump(path, MatrixF(rows.cast<float>()));
}

namespace {

DumpHeader parse_header(std::istream& in, const std::filesystem::path& path) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kDumpMagic, 4) != 0) {
    throw DumpError(DumpError::Kind::bad_magic, "bad magic in " + path.string() + " (expected BACT)");
  }
  try {
    const auto version = io::read_le<std::uint32_t>(in, "dump version");
    if (version != kDumpVersion) {
      throw DumpError(DumpError::Kind::version_mismatch,
                      "unsupported dump version " + std::to_string(version) + " in " + path.string());
    }
    DumpHeader h;
    h.d_in = io::read_le<std::uint32_t>(in, "dump d_in");
    h.n_rows = io::read_le<std::uint64_t>(in, "dump n_rows");
    const auto dtype = io::read_le<std::uint8_t>(in, "dump dtype");
    if (dtype != kDumpDtypeF32) {
      throw DumpError(DumpError::Kind::bad_dtype, "unsupported dump dtype " + std::to_string(dtype));
    }
    return h;
  } catch (const DumpError&) {
    throw;
  } catch (const FormatError& e) {
    throw DumpError(DumpError::Kind::truncated, e.what());
  }
}

}  // namespace

DumpHeader read_dump_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DumpError(DumpError::Kind::io, "cannot open dump " + path.string());
  return parse_header(in, path);
}

DumpReader::DumpReader(const std::filesystem::path& path, std::optional<std::size_t> expected_d_in)
    : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw DumpError(DumpError::Kind::io, "cannot open dump " + path.string());
  header_ = parse_header(in_, path);
  if (expected_d_in && *expected_d_in != header_.d_in) {
    throw DumpError(DumpError::Kind::dim_mismatch, "dump " + path.string() + " has d_in = " +
                                                       std::to_string(header_.d_in) + ", config expects " +
                                                       std::to_string(*expected_d_in));
  }
  const auto size = std::filesystem::file_size(path);
  const std::uint64_t expected = kDumpHeaderBytes + header_.n_rows * header_.d_in * sizeof(float);
  if (size < expected) {
    throw DumpError(DumpError::Kind::truncated, "dump " + path.string() + " is truncated: " + std::to_string(size) +
                                                    " bytes, header implies " + std::to_string(expected));
  }
  end_ = header_.n_rows;
}

void DumpReader::set_range(std::uint64_t begin, std::uint64_t end) {
  if (begin > end || end > header_.n_rows) throw std::out_of_range("dump row range out of bounds");
  begin_ = begin;
  end_ = end;
  rewind();
}

void DumpReader::rewind() { seek_row(begin_); }

void DumpReader::seek_row(std::uint64_t row) {
  in_.clear();
  in_.seekg(static_cast<std::streamoff>(kDumpHeaderBytes + row * header_.d_in * sizeof(float)));
  if (!in_) throw DumpError(DumpError::Kind::io, "seek failed in " + path_.string());
  position_ = row;
}

MatrixF DumpReader::next_raw(std::size_t max_rows) {
  const std::uint64_t take = std::min<std::uint64_t>(max_rows, end_ - position_);
  MatrixF out(static_cast<Index>(take), static_cast<Index>(header_.d_in));
  if (take == 0) return out;
  try {
    io::read_f32_block(in_, out.data(), static_cast<std::size_t>(out.size()), "dump rows");
  } catch (const FormatError& e) {
    throw DumpError(DumpError::Kind::truncated, e.what());
  }
  position_ += take;
  return out;
}

std::vector<std::string> load_tags(const std::filesystem::path& dump_path) {
  auto tag_path = dump_path;
  tag_path += ".tags";
  std::vector<std::string> tags;
  std::ifstream in(tag_path);
  if (!in) return tags;
  std::string line;
  while (std::getline(in, line)) tags.push_back(line);
  return tags;
}

std::vector<ActivationBatch> load_dump(const std::filesystem::path& path, std::size_t batch_size,
                                       std::optional<std::size_t> expected_d_in) {
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  DumpReader reader(path, expected_d_in);
  std::vector<std::string> tags = load_tags(path);
  if (!tags.empty() && tags.size() != reader.header().n_rows) tags.clear();
  std::vector<ActivationBatch> out;
  std::size_t row = 0;
  while (true) {
    MatrixF raw = reader.next_raw(batch_size);
    if (raw.rows() == 0) break;
    std::vector<std::string> batch_tags;
    if (!tags.empty()) {
      batch_tags.assign(tags.begin() + static_cast<std::ptrdiff_t>(row),
                        tags.begin() + static_cast<std::ptrdiff_t>(row + static_cast<std::size_t>(raw.rows())));
    }
    row += static_cast<std::size_t>(raw.rows());
    out.push_back(normalize(raw.cast<double>(), std::move(batch_tags)));
  }
  return out;
}

// --- synthetic -----------------------------------------------------------------

std::string to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::superposed_sparse: return "superposed_sparse";
    case SyntheticKind::circle_manifold: return "circle_manifold";
    case SyntheticKind::sphere_manifold: return "sphere_manifold";
    case SyntheticKind::clustered_directions: return "clustered_directions";
    case SyntheticKind::gaussian_noise: return "gaussian_noise";
  }
  return "unknown";
}

SyntheticKind parse_synthetic_kind(const std::string& name) {
  for (const auto kind : {SyntheticKind::superposed_sparse, SyntheticKind::circle_manifold,
                          SyntheticKind::sphere_manifold, SyntheticKind::clustered_directions,
                          SyntheticKind::gaussian_noise}) {
    if (to_string(kind) == name) return kind;
  }
  throw ConfigError("unknown synthetic kind '" + name + "'");
}

namespace {

std::size_t manifold_rank(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::circle_manifold: return 2;
    case SyntheticKind::sphere_manifold: return 3;
    default: return 0;
  }
}

// Gradient steps on sum_{i != j} (u_i . u_j)^4 that push random unit rows
// apart. Random draws in low dimension often land two directions within a
// few tens of degrees, which makes them indistinguishable as features. The
// work is capped so large dictionaries stay cheap.
void spread_directions(MatrixD& u) {
  constexpr double kStep = 0.05;
  constexpr double kBudget = 2e8;  // multiply-adds
  const double per_iter = 2.0 * static_cast<double>(u.rows()) * static_cast<double>(u.rows()) *
                          static_cast<double>(u.cols());
  const int iters = static_cast<int>(std::min(100.0, std::floor(kBudget / std::max(1.0, per_iter))));
  for (int it = 0; it < iters; ++it) {
    MatrixD coupling = (u * u.transpose()).array().cube().matrix();
    coupling.diagonal().setZero();
    u -= kStep * coupling * u;
    u.rowwise().normalize();
  }
}

std::vector<std::size_t> resolved_subspace(const SyntheticSpec& spec) {
  const std::size_t rank = manifold_rank(spec.kind);
  if (!spec.subspace.empty() || rank == 0) return spec.subspace;
  std::vector<std::size_t> out(rank);
  std::iota(out.begin(), out.end(), 0);
  return out;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (d_in < 1) throw ConfigError("synthetic d_in must be >= 1");
  if (!(sparsity > 0.0 && sparsity <= 1.0)) throw ConfigError("sparsity must be in (0, 1]");
  if (!(noise >= 0.0)) throw ConfigError("noise must be >= 0");
  const auto sub = resolved_subspace(*this);
  const std::size_t rank = manifold_rank(kind);
  if (rank != 0 && sub.size() != rank) {
    throw ConfigError(to_string(kind) + " needs exactly " + std::to_string(rank) + " subspace indices");
  }
  for (std::size_t i = 0; i < sub.size(); ++i) {
    if (sub[i] >= d_in) throw ConfigError("subspace index " + std::to_string(sub[i]) + " >= d_in");
    for (std::size_t j = 0; j < i; ++j) {
      if (sub[i] == sub[j]) throw ConfigError("subspace indices must be distinct");
    }
  }
  if ((kind == SyntheticKind::superposed_sparse || kind == SyntheticKind::clustered_directions) && n_features < 1) {
    throw ConfigError("n_features must be >= 1");
  }
}

std::size_t SyntheticSpec::active_per_sample() const {
  const auto k = static_cast<std::size_t>(std::lround(sparsity * static_cast<double>(n_features)));
  return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(1, n_features));
}

SyntheticData generate(const SyntheticSpec& spec, std::size_t n_samples) {
  spec.validate();
  std::seed_seq seq{spec.seed, std::uint64_t{0xbac7}};
  std::uint64_t streams[2];
  seq.generate(streams, streams + 2);
  std::mt19937_64 structure_rng(streams[0]);
  std::mt19937_64 sample_rng(streams[1]);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  const auto d = static_cast<Index>(spec.d_in);
  const auto n = static_cast<Index>(n_samples);
  SyntheticData out;
  out.raw = MatrixD::Zero(n, d);

  auto random_unit = [&](std::mt19937_64& rng) {
    VectorD v(d);
    do {
      for (Index i = 0; i < d; ++i) v(i) = normal(rng);
    } while (v.norm() < 1e-9);
    return VectorD(v / v.norm());
  };

  switch (spec.kind) {
    case SyntheticKind::superposed_sparse: {
      out.truth.directions.resize(static_cast<Index>(spec.n_features), d);
      for (Index f = 0; f < out.truth.directions.rows(); ++f) out.truth.directions.row(f) = random_unit(structure_rng);
      spread_directions(out.truth.directions);
      const std::size_t k = spec.active_per_sample();
      std::vector<std::size_t> order(spec.n_features);
      for (Index s = 0; s < n; ++s) {
        std::iota(order.begin(), order.end(), 0);
        // Partial Fisher-Yates: the first k entries become the active set.
        for (std::size_t i = 0; i < k; ++i) {
          std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
          std::swap(order[i], order[pick(sample_rng)]);
        }
        for (std::size_t i = 0; i < k; ++i) {
          const double sign = uniform(sample_rng) < 0.5 ? -1.0 : 1.0;
          const double magnitude = 0.5 + uniform(sample_rng);
          out.raw.row(s) += sign * magnitude * out.truth.directions.row(static_cast<Index>(order[i]));
        }
      }
      break;
    }
    case SyntheticKind::circle_manifold:
    case SyntheticKind::sphere_manifold: {
      out.truth.subspace = resolved_subspace(spec);
      const auto rank = static_cast<Index>(out.truth.subspace.size());
      for (Index s = 0; s < n; ++s) {
        VectorD p(rank);
        if (spec.kind == SyntheticKind::circle_manifold) {
          const double theta = 2.0 * M_PI * uniform(sample_rng);
          p << std::cos(theta), std::sin(theta);
        } else {
          do {
            for (Index i = 0; i < rank; ++i) p(i) = normal(sample_rng);
          } while (p.norm() < 1e-9);
          p /= p.norm();
        }
        for (Index i = 0; i < rank; ++i) out.raw(s, static_cast<Index>(out.truth.subspace[static_cast<std::size_t>(i)])) = p(i);
      }
      break;
    }
    case SyntheticKind::clustered_directions: {
      out.truth.directions.resize(static_cast<Index>(spec.n_features), d);
      for (Index f = 0; f < out.truth.directions.rows(); ++f) out.truth.directions.row(f) = random_unit(structure_rng);
      std::uniform_int_distribution<Index> pick(0, out.truth.directions.rows() - 1);
      for (Index s = 0; s < n; ++s) out.raw.row(s) = out.truth.directions.row(pick(sample_rng));
      break;
    }
    case SyntheticKind::gaussian_noise: {
      for (Index s = 0; s < n; ++s)
        for (Index i = 0; i < d; ++i) out.raw(s, i) = normal(sample_rng);
      break;
    }
  }

  if (spec.noise > 0.0 && spec.kind != SyntheticKind::gaussian_noise) {
    for (Index s = 0; s < n; ++s)
      for (Index i = 0; i < d; ++i) out.raw(s, i) += spec.noise * normal(sample_rng);
  }
  out.batch = normalize(out.raw);
  return out;
}

}  // namespace bae
