#include "bae/kernels.hpp"

#include <algorithm>

namespace bae {

namespace {

using Index = Eigen::Index;

Index idx(std::size_t v) { return static_cast<Index>(v); }

void symmetrise(MatrixD& k) { k = 0.5 * (k + k.transpose()).eval(); }

}  // namespace

TileSchedule TileSchedule::make(std::size_t dim, std::size_t block_size) {
  if (block_size == 0) throw ConfigError("block_size must be >= 1");
  TileSchedule s;
  s.dim = dim;
  s.block_size = block_size;
  const std::size_t n = s.num_blocks();
  s.pairs.reserve(n * (n + 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) s.pairs.emplace_back(i, j);
  return s;
}

std::size_t TileSchedule::num_blocks() const { return (dim + block_size - 1) / block_size; }

std::size_t TileSchedule::block_extent(std::size_t b) const {
  return std::min(block_size, dim - block_begin(b));
}

PlainKernelTiles::PlainKernelTiles(const MatrixD& left, const MatrixD& right) : left_(left), right_(right) {
  if (left.rows() != right.rows() || left.cols() != right.cols()) {
    throw ShapeError("left and right encoders must have identical shapes");
  }
}

MatrixD PlainKernelTiles::tile(std::size_t row0, std::size_t rows, std::size_t col0, std::size_t cols) const {
  const auto lr = left_.middleRows(idx(row0), idx(rows));
  const auto lc = left_.middleRows(idx(col0), idx(cols));
  const auto rr = right_.middleRows(idx(row0), idx(rows));
  const auto rc = right_.middleRows(idx(col0), idx(cols));
  return (lr * lc.transpose()).cwiseProduct(rr * rc.transpose());
}

MixedThroughTiles::MixedThroughTiles(const MatrixD& mix, const MatrixD& mixed_kernel)
    : mix_(mix), mixed_kernel_(mixed_kernel) {
  if (mixed_kernel.rows() != mix.rows() || mixed_kernel.cols() != mix.rows()) {
    throw ShapeError("mixed kernel must be d_mix x d_mix");
  }
}

MatrixD MixedThroughTiles::tile(std::size_t row0, std::size_t rows, std::size_t col0, std::size_t cols) const {
  return mix_.middleCols(idx(row0), idx(rows)).transpose() * mixed_kernel_ *
         mix_.middleCols(idx(col0), idx(cols));
}

MatrixD DenseKernelTiles::tile(std::size_t row0, std::size_t rows, std::size_t col0, std::size_t cols) const {
  return kernel_.block(idx(row0), idx(col0), idx(rows), idx(cols));
}

KernelMatrix plain_kernel(const Factors& factors) {
  if (factors.left.rows() != factors.right.rows() || factors.left.cols() != factors.right.cols()) {
    throw ShapeError("left and right encoders must have identical shapes");
  }
  KernelMatrix out;
  out.K = (factors.left * factors.left.transpose()).cwiseProduct(factors.right * factors.right.transpose());
  symmetrise(out.K);
  out.kind = KernelKind::plain;
  return out;
}

KernelMatrix plain_kernel(const BilinearModel& model) { return plain_kernel(model.factors()); }

KernelMatrix mixed_kernel(const Factors& factors, std::size_t block_size) {
  if (!factors.mix) throw VariantError("mixed kernel requires a mixer D");
  const MatrixD& mix = *factors.mix;
  if (static_cast<std::size_t>(mix.cols()) != factors.d_lat()) throw ShapeError("mixer columns must equal d_lat");

  const PlainKernelTiles tiles(factors.left, factors.right);
  const TileSchedule schedule = TileSchedule::make(factors.d_lat(), block_size);
  MatrixD acc = MatrixD::Zero(mix.rows(), mix.rows());
  for (const auto& [bi, bj] : schedule.pairs) {
    const std::size_t r0 = schedule.block_begin(bi), nr = schedule.block_extent(bi);
    const std::size_t c0 = schedule.block_begin(bj), nc = schedule.block_extent(bj);
    const MatrixD part = mix.middleCols(idx(r0), idx(nr)) * tiles.tile(r0, nr, c0, nc) *
                         mix.middleCols(idx(c0), idx(nc)).transpose();
    acc += part;
    if (bi != bj) acc += part.transpose();
  }
  symmetrise(acc);
  return {std::move(acc), KernelKind::mixed};
}

KernelMatrix mixed_kernel(const BilinearModel& model, std::size_t block_size) {
  return mixed_kernel(model.factors(), block_size);
}

VectorD prefix_coefficients(const VectorD& weights) {
  VectorD c(weights.size());
  double running = 0.0;
  for (Index i = weights.size() - 1; i >= 0; --i) {
    if (!(weights(i) >= 0.0)) {
      throw ConfigError("prefix weights must be non-negative (w[" + std::to_string(i) + "] = " +
                        std::to_string(weights(i)) + ")");
    }
    running += weights(i);
    c(i) = running;
  }
  return c;
}

OrderedMask ordered_mask(std::size_t d_lat, const VectorD& weights) {
  if (static_cast<std::size_t>(weights.size()) != d_lat) {
    throw ShapeError("prefix weights need d_lat = " + std::to_string(d_lat) + " entries, got " +
                     std::to_string(weights.size()));
  }
  OrderedMask out;
  out.prefix = prefix_coefficients(weights);
  out.W.resize(idx(d_lat), idx(d_lat));
  for (Index i = 0; i < idx(d_lat); ++i)
    for (Index j = 0; j < idx(d_lat); ++j) out.W(i, j) = out.prefix(std::max(i, j));
  return out;
}

VectorD uniform_prefix_weights(std::size_t d_lat) {
  if (d_lat == 0) return VectorD();
  return VectorD::Constant(idx(d_lat), 1.0 / static_cast<double>(d_lat));
}

VectorD blocked_quadratic_form(const MatrixD& f, const KernelTiles& kernel, const TileSchedule& schedule,
                               const VectorD* prefix) {
  const std::size_t dim = kernel.dim();
  if (static_cast<std::size_t>(f.cols()) != dim) {
    throw ShapeError("latent batch has " + std::to_string(f.cols()) + " columns, kernel is " +
                     std::to_string(dim) + "-dimensional");
  }
  if (schedule.dim != dim) {
    throw ShapeError("tile schedule covers " + std::to_string(schedule.dim) + " latents, kernel has " +
                     std::to_string(dim));
  }
  if (prefix && static_cast<std::size_t>(prefix->size()) != dim) {
    throw ShapeError("prefix mask length does not match kernel dimension");
  }

  VectorD out = VectorD::Zero(f.rows());
  for (const auto& [bi, bj] : schedule.pairs) {
    const std::size_t r0 = schedule.block_begin(bi), nr = schedule.block_extent(bi);
    const std::size_t c0 = schedule.block_begin(bj), nc = schedule.block_extent(bj);
    MatrixD tile = kernel.tile(r0, nr, c0, nc);
    if (prefix) {
      for (Index a = 0; a < tile.rows(); ++a)
        for (Index b = 0; b < tile.cols(); ++b) tile(a, b) *= (*prefix)(std::max(idx(r0) + a, idx(c0) + b));
    }
    const auto fr = f.middleCols(idx(r0), idx(nr));
    const auto fc = f.middleCols(idx(c0), idx(nc));
    const VectorD contrib = (fr * tile).cwiseProduct(fc).rowwise().sum();
    // Only the symmetric part contributes, so each off-diagonal tile stands in
    // for its mirror image.
    out += (bi == bj ? 1.0 : 2.0) * contrib;
  }
  return out;
}

}  // namespace bae
