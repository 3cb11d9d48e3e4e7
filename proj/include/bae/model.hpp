#pragma once

#include "bae/common.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>

namespace bae {

struct ModelDims {
  std::size_t d_in = 0;
  std::size_t d_lat = 0;
  std::optional<std::size_t> d_mix;

  void validate() const;
};

// Double-precision copy of the trainable factors. Every loss, gradient and
// analysis routine works on this view; the model itself stores 32-bit floats.
struct Factors {
  MatrixD left;                 // d_lat x d_in
  MatrixD right;                // d_lat x d_in
  std::optional<MatrixD> mix;   // d_mix x d_lat

  std::size_t d_in() const { return static_cast<std::size_t>(left.cols()); }
  std::size_t d_lat() const { return static_cast<std::size_t>(left.rows()); }
};

/// Bilinear autoencoder with tied decoder.
///
/// Latent j computes f_j(x) = (l_j . x)(r_j . x), i.e. the rank-1 bilinear form
/// x^T l_j r_j^T x. The decoder is the transpose of the (implicit) product
/// space encoder, so L, R and the optional mixer D are the whole state.
class BilinearModel {
 public:
  BilinearModel() = default;
  BilinearModel(Variant variant, MatrixF left, MatrixF right, std::optional<MatrixF> mix = std::nullopt);

  /// Semi-orthogonal initialisation of L, R (and D when the variant mixes).
  static BilinearModel orthogonal(const ModelDims& dims, Variant variant, std::uint64_t seed);

  Variant variant() const { return variant_; }
  ModelDims dims() const;
  std::size_t d_in() const { return static_cast<std::size_t>(left_.cols()); }
  std::size_t d_lat() const { return static_cast<std::size_t>(left_.rows()); }

  const MatrixF& left() const { return left_; }
  const MatrixF& right() const { return right_; }
  const std::optional<MatrixF>& mix() const { return mix_; }

  MatrixF& left() { return left_; }
  MatrixF& right() { return right_; }
  std::optional<MatrixF>& mix() { return mix_; }

  Factors factors() const;

  /// Bit-exact comparison of variant, shapes and weights.
  bool operator==(const BilinearModel& other) const;

 private:
  void check_invariants() const;

  Variant variant_ = Variant::vanilla;
  MatrixF left_;
  MatrixF right_;
  std::optional<MatrixF> mix_;
};

struct LatentActivations {
  MatrixD f;                   // n_samples x d_lat
  std::optional<MatrixD> g;    // n_samples x d_mix, g = f D^T
};

/// Latent activations for row-wise inputs `x` (n_samples x d_in).
LatentActivations encode(const Factors& factors, const MatrixD& x);
LatentActivations encode(const BilinearModel& model, const MatrixD& x);

/// l_j r_j^T, the rank-1 bilinear form of latent j.
MatrixD latent_form(const BilinearModel& model, std::size_t j);
MatrixD latent_form(const Factors& factors, std::size_t j);

/// Rows of a (rows x cols) matrix orthonormal in blocks of `cols` rows.
MatrixD semi_orthogonal(std::size_t rows, std::size_t cols, std::uint64_t seed);

// Checkpoint container ("BAE1"): little-endian header then row-major f32 data.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointHeader {
  Variant variant = Variant::vanilla;
  std::uint32_t d_in = 0;
  std::uint32_t d_lat = 0;
  std::uint32_t d_mix = 0;  // 0 when absent; holds k for topk checkpoints
};

void write_checkpoint_header(std::ostream& out, const CheckpointHeader& header);
CheckpointHeader read_checkpoint_header(std::istream& in);
CheckpointHeader peek_checkpoint(const std::filesystem::path& path);

void save_checkpoint(const BilinearModel& model, const std::filesystem::path& path);
BilinearModel load_checkpoint(const std::filesystem::path& path);

}  // namespace bae
