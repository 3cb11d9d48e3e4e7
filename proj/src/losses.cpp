#include "bae/losses.hpp"

#include <algorithm>
#include <cmath>

namespace bae {

namespace {

using Index = Eigen::Index;

VectorD resolve_weights(const VectorD& weights, std::size_t d_lat) {
  if (weights.size() == 0) return uniform_prefix_weights(d_lat);
  if (static_cast<std::size_t>(weights.size()) != d_lat) {
    throw ShapeError("prefix weights need " + std::to_string(d_lat) + " entries");
  }
  return weights;
}

const MatrixD& require_mix(const Factors& factors) {
  if (!factors.mix) throw VariantError("variant requires a mixer D");
  if (static_cast<std::size_t>(factors.mix->cols()) != factors.d_lat()) {
    throw ShapeError("mixer columns must equal d_lat");
  }
  return *factors.mix;
}

void check_latents(const Factors& factors, const MatrixD& f) {
  if (static_cast<std::size_t>(f.cols()) != factors.d_lat()) {
    throw ShapeError("latent batch has " + std::to_string(f.cols()) + " columns, model has d_lat = " +
                     std::to_string(factors.d_lat()));
  }
}

}  // namespace

VectorD sse_vanilla(const Factors& factors, const MatrixD& f, std::size_t block_size) {
  check_latents(factors, f);
  const PlainKernelTiles tiles(factors.left, factors.right);
  const auto schedule = TileSchedule::make(factors.d_lat(), block_size);
  VectorD out = blocked_quadratic_form(f, tiles, schedule);
  out += -2.0 * f.rowwise().squaredNorm() + VectorD::Ones(f.rows());
  return out;
}

VectorD sse_ordered(const Factors& factors, const MatrixD& f, const VectorD& weights, std::size_t block_size) {
  check_latents(factors, f);
  const VectorD w = resolve_weights(weights, factors.d_lat());
  const VectorD c = prefix_coefficients(w);
  const PlainKernelTiles tiles(factors.left, factors.right);
  const auto schedule = TileSchedule::make(factors.d_lat(), block_size);
  VectorD out = blocked_quadratic_form(f, tiles, schedule, &c);
  out += -2.0 * (f.array().square().rowwise() * c.transpose().array()).rowwise().sum().matrix();
  out.array() += w.sum();
  return out;
}

VectorD sse_mixed(const Factors& factors, const MatrixD& f, std::size_t block_size) {
  check_latents(factors, f);
  const MatrixD& mix = require_mix(factors);
  const KernelMatrix kmix = mixed_kernel(factors, block_size);
  const MatrixD g = f * mix.transpose();
  const DenseKernelTiles tiles(kmix.K);
  const auto schedule = TileSchedule::make(static_cast<std::size_t>(mix.rows()), block_size);
  VectorD out = blocked_quadratic_form(g, tiles, schedule);
  out += -2.0 * g.rowwise().squaredNorm() + VectorD::Ones(f.rows());
  return out;
}

VectorD sse_combined(const Factors& factors, const MatrixD& f, const VectorD& weights, std::size_t block_size) {
  check_latents(factors, f);
  const MatrixD& mix = require_mix(factors);
  const VectorD w = resolve_weights(weights, factors.d_lat());
  const VectorD c = prefix_coefficients(w);
  const KernelMatrix kmix = mixed_kernel(factors, block_size);
  const MixedThroughTiles tiles(mix, kmix.K);
  const auto schedule = TileSchedule::make(factors.d_lat(), block_size);
  VectorD out = blocked_quadratic_form(f, tiles, schedule, &c);
  // f^T Diag(c) (D^T D) f, with (D^T D) f formed as (f D^T) D.
  const MatrixD through = (f * mix.transpose()) * mix;
  out += -2.0 * (f.cwiseProduct(through).array().rowwise() * c.transpose().array()).rowwise().sum().matrix();
  out.array() += w.sum();
  return out;
}

double hoyer_from_sums(double l1, double sum_sq, std::size_t n) {
  if (n < 2) throw std::invalid_argument("Hoyer density needs at least 2 entries");
  if (!(sum_sq > 0.0)) return 0.0;
  const double ratio = l1 / std::sqrt(sum_sq);
  const double value = (ratio - 1.0) / (std::sqrt(static_cast<double>(n)) - 1.0);
  return std::clamp(value, 0.0, 1.0);
}

double hoyer_density(std::span<const double> v) {
  if (v.size() < 2) throw std::invalid_argument("Hoyer density needs at least 2 entries");
  double l1 = 0.0, sum_sq = 0.0;
  double lo = std::abs(v[0]), hi = lo;
  for (const double x : v) {
    const double a = std::abs(x);
    l1 += a;
    sum_sq += x * x;
    lo = std::min(lo, a);
    hi = std::max(hi, a);
  }
  if (!(sum_sq > 0.0)) return 0.0;
  // Equal magnitudes are exactly uniform; skip the rounding in l1 / l2.
  if (lo == hi) return 1.0;
  return hoyer_from_sums(l1, sum_sq, v.size());
}

double hoyer_density(const VectorD& v) {
  return hoyer_density(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

VectorD column_densities(const MatrixD& f) {
  if (f.rows() < 2) throw std::invalid_argument("density needs at least 2 samples");
  VectorD out(f.cols());
  for (Index j = 0; j < f.cols(); ++j) {
    const VectorD col = f.col(j);
    out(j) = hoyer_density(col);
  }
  return out;
}

double batch_density_penalty(const MatrixD& f) {
  const VectorD d = column_densities(f);
  return d.size() == 0 ? 0.0 : d.mean();
}

VectorD density_weights(Variant variant, std::size_t d_lat) {
  if (d_lat == 0) return VectorD();
  VectorD w(static_cast<Index>(d_lat));
  if (is_ordered(variant)) {
    for (std::size_t j = 0; j < d_lat; ++j) w(static_cast<Index>(j)) = static_cast<double>(d_lat - j);
  } else {
    w.setOnes();
  }
  return w / w.sum();
}

VectorD sse_for_variant(const Factors& factors, const MatrixD& f, Variant variant, const LossOptions& options) {
  switch (variant) {
    case Variant::vanilla: return sse_vanilla(factors, f, options.block_size);
    case Variant::ordered: return sse_ordered(factors, f, options.prefix_weights, options.block_size);
    case Variant::mixed: return sse_mixed(factors, f, options.block_size);
    case Variant::combined: return sse_combined(factors, f, options.prefix_weights, options.block_size);
    case Variant::topk: break;
  }
  throw VariantError("no bilinear loss for variant " + to_string(variant));
}

LossBreakdown total_loss(const Factors& factors, const MatrixD& x, double alpha, Variant variant,
                         const LossOptions& options) {
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
  const LatentActivations acts = encode(factors, x);
  LossBreakdown out;
  out.error = sse_for_variant(factors, acts.f, variant, options).mean();
  if (alpha > 0.0 || x.rows() >= 2) {
    const VectorD dens = column_densities(acts.f);
    out.density = dens.size() ? dens.mean() : 0.0;
    out.density_term = dens.size() ? density_weights(variant, factors.d_lat()).dot(dens) : 0.0;
  }
  out.total = out.error + alpha * out.density_term;
  return out;
}

LossBreakdown total_loss(const BilinearModel& model, const MatrixD& x, double alpha, const LossOptions& options) {
  return total_loss(model.factors(), x, alpha, model.variant(), options);
}

LossGradient loss_and_gradient(const Factors& factors, const MatrixD& x, double alpha, Variant variant,
                               const VectorD& prefix_weights) {
  if (variant == Variant::topk) throw VariantError("no bilinear loss for variant topk");
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
  if (static_cast<std::size_t>(x.cols()) != factors.d_in()) {
    throw ShapeError("batch has d_in = " + std::to_string(x.cols()) + " but model expects " +
                     std::to_string(factors.d_in()));
  }
  if (x.rows() < 2) throw std::invalid_argument("loss needs at least 2 samples");
  const bool mixing = has_mixer(variant);
  const bool ordered = is_ordered(variant);
  if (mixing) require_mix(factors);

  const MatrixD& L = factors.left;
  const MatrixD& R = factors.right;
  const Index d_lat = L.rows();
  const double n = static_cast<double>(x.rows());

  const MatrixD a = x * L.transpose();
  const MatrixD b = x * R.transpose();
  const MatrixD f = a.cwiseProduct(b);
  const MatrixD gram = (f.transpose() * f) / n;

  const MatrixD P = L * L.transpose();
  const MatrixD Q = R * R.transpose();
  MatrixD K = P.cwiseProduct(Q);
  K = 0.5 * (K + K.transpose()).eval();

  VectorD c = VectorD::Ones(d_lat);
  double weight_sum = 1.0;
  MatrixD W;
  if (ordered) {
    const VectorD w = resolve_weights(prefix_weights, static_cast<std::size_t>(d_lat));
    OrderedMask mask = ordered_mask(static_cast<std::size_t>(d_lat), w);
    W = std::move(mask.W);
    c = std::move(mask.prefix);
    weight_sum = w.sum();
  }

  MatrixD E;
  MatrixD through;  // E K E
  if (mixing) {
    const MatrixD& D = *factors.mix;
    E = D.transpose() * D;
    through = E * K * E;
  }
  const MatrixD& kernel_term = mixing ? through : K;
  const MatrixD H = ordered ? MatrixD(kernel_term.cwiseProduct(W)) : kernel_term;
  const MatrixD M = ordered ? MatrixD(gram.cwiseProduct(W)) : gram;

  LossGradient out;
  double cross = 0.0;  // <G, Diag(c) E>
  if (mixing) {
    cross = (c.asDiagonal() * gram).cwiseProduct(E).sum();
  } else {
    cross = gram.diagonal().dot(c);
  }
  out.loss.error = gram.cwiseProduct(H).sum() - 2.0 * cross + weight_sum;

  // dError/dK, then through K = P .* Q into L and R.
  const MatrixD d_kernel = mixing ? MatrixD(E * M * E) : M;
  out.d_left = 2.0 * d_kernel.cwiseProduct(Q) * L;
  out.d_right = 2.0 * d_kernel.cwiseProduct(P) * R;

  MatrixD d_f = (2.0 / n) * (f * H);
  if (mixing) {
    d_f -= (2.0 / n) * (f * (c.asDiagonal() * E + E * c.asDiagonal()));
  } else {
    d_f -= (4.0 / n) * (f * c.asDiagonal());
  }

  if (mixing) {
    const MatrixD& D = *factors.mix;
    MatrixD d_e = M * E * K + K * E * M - 2.0 * (c.asDiagonal() * gram);
    out.d_mix = D * (d_e + d_e.transpose());
  }

  // Density penalty, computed per latent across the batch.
  const VectorD omega = density_weights(variant, static_cast<std::size_t>(d_lat));
  const double root_n = std::sqrt(n);
  double density_sum = 0.0, density_term = 0.0;
  for (Index j = 0; j < d_lat; ++j) {
    const auto col = f.col(j);
    const double l1 = col.cwiseAbs().sum();
    const double sum_sq = col.squaredNorm();
    const VectorD colv = col;
    const double h = hoyer_density(colv);
    density_sum += h;
    density_term += omega(j) * h;
    if (alpha > 0.0 && sum_sq > 0.0) {
      const double l2 = std::sqrt(sum_sq);
      const double scale = alpha * omega(j) / (root_n - 1.0);
      for (Index s = 0; s < f.rows(); ++s) {
        const double v = col(s);
        const double sign = (v > 0.0) - (v < 0.0);
        d_f(s, j) += scale * (sign / l2 - l1 * v / (l2 * sum_sq));
      }
    }
  }
  out.loss.density = d_lat ? density_sum / static_cast<double>(d_lat) : 0.0;
  out.loss.density_term = density_term;
  out.loss.total = out.loss.error + alpha * density_term;

  out.d_left += d_f.cwiseProduct(b).transpose() * x;
  out.d_right += d_f.cwiseProduct(a).transpose() * x;
  return out;
}

}  // namespace bae
