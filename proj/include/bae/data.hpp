#pragma once

#include "bae/common.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace bae {

/// Rows of unit L2 norm plus optional opaque per-row tags.
struct ActivationBatch {
  MatrixD rows;                    // n_samples x d_in
  std::vector<std::string> tags;   // empty, or one per row
  std::size_t dropped = 0;         // rows removed for having (near) zero norm

  std::size_t size() const { return static_cast<std::size_t>(rows.rows()); }
  std::size_t d_in() const { return static_cast<std::size_t>(rows.cols()); }
};

inline constexpr double kMinRowNorm = 1e-12;

/// Divides each row by its L2 norm; rows with norm below 1e-12 are dropped
/// and counted.
ActivationBatch normalize(const MatrixD& raw, std::vector<std::string> tags = {});

// --- activation dump ("BACT") ------------------------------------------------

inline constexpr std::uint32_t kDumpVersion = 1;
inline constexpr std::uint8_t kDumpDtypeF32 = 1;
inline constexpr std::size_t kDumpHeaderBytes = 4 + 4 + 4 + 8 + 1;

class DumpError : public FormatError {
 public:
  enum class Kind { bad_magic, version_mismatch, bad_dtype, truncated, dim_mismatch, io };
  DumpError(Kind kind, const std::string& what) : FormatError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct DumpHeader {
  std::uint32_t d_in = 0;
  std::uint64_t n_rows = 0;
};

/// Writes raw (unnormalised) rows in the dump layout.
void write_dump(const std::filesystem::path& path, const MatrixF& rows);
void write_dump(const std::filesystem::path& path, const MatrixD& rows);

DumpHeader read_dump_header(const std::filesystem::path& path);

/// Sequential reader over a row range of a dump. Holds at most one batch.
class DumpReader {
 public:
  DumpReader(const std::filesystem::path& path, std::optional<std::size_t> expected_d_in = std::nullopt);

  const DumpHeader& header() const { return header_; }

  /// Restricts reading to rows [begin, end) and rewinds to `begin`.
  void set_range(std::uint64_t begin, std::uint64_t end);
  void rewind();

  /// Next `max_rows` raw rows in file order (fewer at the end, empty when done).
  MatrixF next_raw(std::size_t max_rows);

  std::uint64_t position() const { return position_; }
  std::uint64_t range_end() const { return end_; }

 private:
  void seek_row(std::uint64_t row);

  std::filesystem::path path_;
  std::ifstream in_;
  DumpHeader header_;
  std::uint64_t begin_ = 0;
  std::uint64_t end_ = 0;
  std::uint64_t position_ = 0;
};

/// Normalised batches of `batch_size` rows in file order; the final batch may
/// be short.
std::vector<ActivationBatch> load_dump(const std::filesystem::path& path, std::size_t batch_size,
                                       std::optional<std::size_t> expected_d_in = std::nullopt);

/// Reads optional per-row tags from "<dump>.tags" (one per line).
std::vector<std::string> load_tags(const std::filesystem::path& dump_path);

// --- synthetic data ------------------------------------------------------------

enum class SyntheticKind { superposed_sparse, circle_manifold, sphere_manifold, clustered_directions, gaussian_noise };

std::string to_string(SyntheticKind kind);
SyntheticKind parse_synthetic_kind(const std::string& name);

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::superposed_sparse;
  std::size_t d_in = 16;
  std::size_t n_features = 24;          // planted directions / cluster centres
  std::vector<std::size_t> subspace;    // coordinate indices for manifold kinds
  double sparsity = 0.05;               // fraction of planted features active per sample
  double noise = 0.01;                  // std of isotropic gaussian noise
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t active_per_sample() const;
};

/// Planted structure behind a synthetic batch.
struct GroundTruth {
  MatrixD directions;                 // planted unit directions (rows), if any
  std::vector<std::size_t> subspace;  // coordinate indices of a planted manifold
};

struct SyntheticData {
  MatrixD raw;                        // before normalisation, noise included
  ActivationBatch batch;              // normalised
  GroundTruth truth;
};

/// Deterministic in (spec, n_samples). Superposed directions are random unit
/// vectors pushed apart to low mutual coherence before sampling.
SyntheticData generate(const SyntheticSpec& spec, std::size_t n_samples);

}  // namespace bae
