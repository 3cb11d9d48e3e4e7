#pragma once

#include "bae/kernels.hpp"

#include <span>

namespace bae {

struct LossBreakdown {
  double error = 0.0;         // mean reconstruction SSE in product space
  double density = 0.0;       // mean Hoyer density over latents
  double density_term = 0.0;  // penalty actually weighted by alpha (position-weighted when ordered)
  double total = 0.0;         // error + alpha * density_term
};

struct LossOptions {
  VectorD prefix_weights;  // empty: uniform 1/d_lat
  std::size_t block_size = kDefaultBlockSize;
};

// Per-sample product-space SSE, evaluated through the kernel only. Inputs are
// assumed unit-normalised so X^T X = 1.
VectorD sse_vanilla(const Factors& factors, const MatrixD& f, std::size_t block_size = kDefaultBlockSize);
VectorD sse_ordered(const Factors& factors, const MatrixD& f, const VectorD& weights,
                    std::size_t block_size = kDefaultBlockSize);
VectorD sse_mixed(const Factors& factors, const MatrixD& f, std::size_t block_size = kDefaultBlockSize);
VectorD sse_combined(const Factors& factors, const MatrixD& f, const VectorD& weights,
                     std::size_t block_size = kDefaultBlockSize);

/// Hoyer density (|v|_1 / |v|_2 - 1) / (sqrt(n) - 1). Zero vectors score 0.
double hoyer_density(std::span<const double> v);
double hoyer_density(const VectorD& v);

/// Hoyer density from streamed sums: sum |v_i|, sum v_i^2 and the length n.
double hoyer_from_sums(double l1, double sum_sq, std::size_t n);

/// Per-latent Hoyer density, each column reduced across all samples.
VectorD column_densities(const MatrixD& f);

/// Mean over latents of the column-wise Hoyer density.
double batch_density_penalty(const MatrixD& f);

/// Averaging weights for the per-latent penalty: uniform, or proportional to
/// (d_lat - j) for ordered variants. Sums to one.
VectorD density_weights(Variant variant, std::size_t d_lat);

/// Per-sample SSE for the variant's reconstruction path.
VectorD sse_for_variant(const Factors& factors, const MatrixD& f, Variant variant, const LossOptions& options = {});

/// error + alpha * penalty for one batch of normalised rows.
LossBreakdown total_loss(const Factors& factors, const MatrixD& x, double alpha, Variant variant,
                         const LossOptions& options = {});
LossBreakdown total_loss(const BilinearModel& model, const MatrixD& x, double alpha, const LossOptions& options = {});

struct LossGradient {
  LossBreakdown loss;
  MatrixD d_left;
  MatrixD d_right;
  std::optional<MatrixD> d_mix;
};

/// Closed-form loss and its gradient with respect to L, R and D.
///
/// All variants share one shape: with G = F^T F / n, E = D^T D (identity when
/// there is no mixer), prefix mask W and suffix sums c,
///
///   error = <G, (E K E) .* W> - 2 <G, Diag(c) E> + sum(w)
///
/// which reduces to f^T K f - 2 |f|^2 + 1 for the vanilla model.
LossGradient loss_and_gradient(const Factors& factors, const MatrixD& x, double alpha, Variant variant,
                               const VectorD& prefix_weights = {});

}  // namespace bae
