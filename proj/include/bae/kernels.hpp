#pragma once

#include "bae/model.hpp"

#include <memory>
#include <utility>
#include <vector>

namespace bae {

enum class KernelKind { plain, ordered, mixed, combined };

struct KernelMatrix {
  MatrixD K;
  KernelKind kind = KernelKind::plain;
};

inline constexpr std::size_t kDefaultBlockSize = 512;

/// Upper-triangle tiling of a (dim x dim) latent grid.
struct TileSchedule {
  std::size_t dim = 0;
  std::size_t block_size = kDefaultBlockSize;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (block_i, block_j), i <= j

  static TileSchedule make(std::size_t dim, std::size_t block_size = kDefaultBlockSize);

  std::size_t num_blocks() const;
  std::size_t block_begin(std::size_t b) const { return b * block_size; }
  std::size_t block_extent(std::size_t b) const;
};

/// Source of kernel tiles. Implementations compute tiles on demand so the full
/// (dim x dim) kernel need not exist.
class KernelTiles {
 public:
  virtual ~KernelTiles() = default;
  virtual std::size_t dim() const = 0;
  virtual MatrixD tile(std::size_t row0, std::size_t rows, std::size_t col0, std::size_t cols) const = 0;
};

/// Tiles of (L L^T) .* (R R^T).
class PlainKernelTiles final : public KernelTiles {
 public:
  PlainKernelTiles(const MatrixD& left, const MatrixD& right);
  std::size_t dim() const override { return static_cast<std::size_t>(left_.rows()); }
  MatrixD tile(std::size_t row0, std::size_t rows, std::size_t col0, std::size_t cols) const override;

 private:
  const MatrixD& left_;
  const MatrixD& right_;
};

/// Tiles of D^T K_mix D: the kernel seen by latents that are routed through
/// the mixing bottleneck before decoding.
class MixedThroughTiles final : public KernelTiles {
 public:
  MixedThroughTiles(const MatrixD& mix, const MatrixD& mixed_kernel);
  std::size_t dim() const override { return static_cast<std::size_t>(mix_.cols()); }
  MatrixD tile(std::size_t row0, std::size_t rows, std::size_t col0, std::size_t cols) const override;

 private:
  const MatrixD& mix_;
  const MatrixD& mixed_kernel_;
};

class DenseKernelTiles final : public KernelTiles {
 public:
  explicit DenseKernelTiles(const MatrixD& kernel) : kernel_(kernel) {}
  std::size_t dim() const override { return static_cast<std::size_t>(kernel_.rows()); }
  MatrixD tile(std::size_t row0, std::size_t rows, std::size_t col0, std::size_t cols) const override;

 private:
  const MatrixD& kernel_;
};

/// K[i][j] = (l_i . l_j)(r_i . r_j), symmetrised.
KernelMatrix plain_kernel(const Factors& factors);
KernelMatrix plain_kernel(const BilinearModel& model);

/// D K D^T assembled tile by tile from L, R.
KernelMatrix mixed_kernel(const Factors& factors, std::size_t block_size = kDefaultBlockSize);
KernelMatrix mixed_kernel(const BilinearModel& model, std::size_t block_size = kDefaultBlockSize);

struct OrderedMask {
  MatrixD W;        // W[i][j] = sum_{k >= max(i,j)} w_k
  VectorD prefix;   // c_i = sum_{k >= i} w_k
};

/// Cumulative-prefix mask for the ordered loss (0-based latent indices).
OrderedMask ordered_mask(std::size_t d_lat, const VectorD& weights);

/// Suffix sums c_i = sum_{k >= i} w_k; rejects negative weights.
VectorD prefix_coefficients(const VectorD& weights);

VectorD uniform_prefix_weights(std::size_t d_lat);

/// Per-sample f_s^T (K .* W) f_s evaluated over the upper-triangle tiles of
/// `schedule`. Off-diagonal tiles count twice. When `prefix` is given the mask
/// W[i][j] = prefix[max(i,j)] is applied tile-wise; otherwise W = 1.
/// Tiles are reduced in schedule order, so results are deterministic.
VectorD blocked_quadratic_form(const MatrixD& f, const KernelTiles& kernel, const TileSchedule& schedule,
                               const VectorD* prefix = nullptr);

}  // namespace bae
