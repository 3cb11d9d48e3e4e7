#pragma once

#include "bae/model.hpp"

namespace bae {

struct OptimConfig {
  double lr = 0.01;
  std::size_t steps = 1024;
  double warmup_frac = 0.5;            // fraction of steps held at peak lr
  std::size_t alpha_warmup_steps = 256;
  int ns_iters = 5;

  void validate() const;
};

// Quintic Newton-Schulz coefficients from the reference Muon implementation.
inline constexpr double kNewtonSchulzA = 3.4445;
inline constexpr double kNewtonSchulzB = -4.7750;
inline constexpr double kNewtonSchulzC = 2.0315;
inline constexpr int kCubicPolishIters = 3;

/// Approximate U V^T of the SVD G = U S V^T.
///
/// Input is scaled by its Frobenius norm, then iterated in its wide
/// orientation X <- aX + b(XX^T)X + c(XX^T)^2 X, followed by
/// kCubicPolishIters steps of X <- 1.5X - 0.5(XX^T)X. The orientation of square
/// inputs is chosen from the data, so orthogonalize(G^T) == orthogonalize(G)^T
/// holds bit for bit.
MatrixD orthogonalize(const MatrixD& g, int iterations = 5);

/// Trapezoid: constant, then linear decay to zero over the trailing steps.
double lr_at(std::size_t step, const OptimConfig& config);

/// Linear ramp of alpha over the first alpha_warmup_steps.
double alpha_at(std::size_t step, double alpha_target, const OptimConfig& config);

/// sqrt(max(rows, cols) / min(rows, cols)).
double shape_scale(Eigen::Index rows, Eigen::Index cols);

/// In-place orthogonalised-gradient update P <- P - lr * scale * orth(dP).
/// No momentum is kept.
void apply_update(MatrixF& param, const MatrixD& gradient, double lr, int ns_iters);

struct Gradients {
  MatrixD d_left;
  MatrixD d_right;
  std::optional<MatrixD> d_mix;
};

/// One optimizer step over every parameter matrix of the model.
void step(BilinearModel& model, const Gradients& gradients, std::size_t step_index, const OptimConfig& config);

}  // namespace bae
