#include "bae/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace bae {

void OptimConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (!(warmup_frac > 0.0 && warmup_frac <= 1.0)) throw ConfigError("warmup_frac must be in (0, 1]");
  if (ns_iters < 1) throw ConfigError("ns_iters must be >= 1");
}

namespace {

// Lexicographic comparison of G against G^T in column-major order; decides
// which orientation a square matrix is iterated in.
bool prefer_transposed(const MatrixD& g) {
  for (Eigen::Index c = 0; c < g.cols(); ++c) {
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      const double a = g(r, c), b = g(c, r);
      if (a != b) return b < a;
    }
  }
  return false;
}

MatrixD newton_schulz_wide(MatrixD x, int iterations) {
  for (int i = 0; i < iterations; ++i) {
    const MatrixD gram = x * x.transpose();
    const MatrixD poly = kNewtonSchulzB * gram + kNewtonSchulzC * (gram * gram);
    x = kNewtonSchulzA * x + poly * x;
  }
  // The quintic settles into a band around 1 rather than converging; the
  // cubic iteration pulls that band onto 1.
  for (int i = 0; i < kCubicPolishIters; ++i) {
    const MatrixD gram = x * x.transpose();
    x = 1.5 * x - 0.5 * (gram * x);
  }
  return x;
}

}  // namespace

MatrixD orthogonalize(const MatrixD& g, int iterations) {
  if (!g.allFinite()) throw std::invalid_argument("orthogonalize: non-finite gradient entries");
  if (iterations < 1) throw ConfigError("ns_iters must be >= 1");
  if (g.size() == 0) return MatrixD::Zero(g.rows(), g.cols());

  const bool transpose =
      g.rows() > g.cols() || (g.rows() == g.cols() && prefer_transposed(g));
  MatrixD x = transpose ? MatrixD(g.transpose()) : g;
  // Norm of the reoriented copy, so G and G^T see the same summation order.
  const double norm = x.norm();
  if (norm == 0.0) return MatrixD::Zero(g.rows(), g.cols());
  x /= (norm + 1e-12);
  x = newton_schulz_wide(std::move(x), iterations);
  return transpose ? MatrixD(x.transpose()) : x;
}

double lr_at(std::size_t step, const OptimConfig& config) {
  if (step >= config.steps) {
    throw std::out_of_range("step " + std::to_string(step) + " outside schedule of " +
                            std::to_string(config.steps) + " steps");
  }
  const auto flat = static_cast<std::size_t>(std::floor(config.warmup_frac * static_cast<double>(config.steps)));
  if (step < flat) return config.lr;
  const double ramp = static_cast<double>(config.steps - flat);
  return config.lr * static_cast<double>(config.steps - step) / ramp;
}

double alpha_at(std::size_t step, double alpha_target, const OptimConfig& config) {
  if (config.alpha_warmup_steps == 0) return alpha_target;
  const double frac = static_cast<double>(step) / static_cast<double>(config.alpha_warmup_steps);
  return alpha_target * std::min(1.0, frac);
}

double shape_scale(Eigen::Index rows, Eigen::Index cols) {
  const auto hi = static_cast<double>(std::max(rows, cols));
  const auto lo = static_cast<double>(std::max<Eigen::Index>(1, std::min(rows, cols)));
  return std::sqrt(hi / lo);
}

void apply_update(MatrixF& param, const MatrixD& gradient, double lr, int ns_iters) {
  if (gradient.rows() != param.rows() || gradient.cols() != param.cols()) {
    throw ShapeError("gradient shape " + std::to_string(gradient.rows()) + "x" + std::to_string(gradient.cols()) +
                     " does not match parameter " + std::to_string(param.rows()) + "x" +
                     std::to_string(param.cols()));
  }
  const MatrixD update = orthogonalize(gradient, ns_iters) * (lr * shape_scale(param.rows(), param.cols()));
  param -= update.cast<float>();
}

void step(BilinearModel& model, const Gradients& gradients, std::size_t step_index, const OptimConfig& config) {
  if (model.mix().has_value() != gradients.d_mix.has_value()) {
    throw ShapeError("mixer gradient presence does not match the model");
  }
  const double lr = lr_at(step_index, config);
  apply_update(model.left(), gradients.d_left, lr, config.ns_iters);
  apply_update(model.right(), gradients.d_right, lr, config.ns_iters);
  if (model.mix()) apply_update(*model.mix(), *gradients.d_mix, lr, config.ns_iters);
}

}  // namespace bae
