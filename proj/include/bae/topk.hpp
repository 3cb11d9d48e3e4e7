#pragma once

#include "bae/trainer.hpp"

namespace bae {

/// Conventional TopK sparse autoencoder used as a reconstruction baseline.
struct TopKModel {
  MatrixF encoder;          // d_lat x d_in
  Eigen::VectorXf enc_bias; // d_lat
  MatrixF decoder;          // d_in x d_lat, unit-norm columns
  Eigen::VectorXf dec_bias; // d_in
  std::size_t k = 1;

  std::size_t d_in() const { return static_cast<std::size_t>(encoder.cols()); }
  std::size_t d_lat() const { return static_cast<std::size_t>(encoder.rows()); }

  /// Orthogonal encoder, tied decoder, zero biases.
  static TopKModel init(std::size_t d_in, std::size_t d_lat, std::size_t k, std::uint64_t seed);

  void normalize_decoder();
  void validate() const;
  bool operator==(const TopKModel& other) const;
};

struct TopKOutput {
  MatrixD codes;           // n x d_lat, k nonzeros per row
  MatrixD reconstruction;  // n x d_in
  VectorD sse;             // |x - x_hat|^2 per row
};

/// Keeps the k largest pre-activations (ties to the lower index), zeroes the
/// rest, then decodes.
TopKOutput topk_forward(const TopKModel& model, const MatrixD& x);

/// Product-space error |x (x) x - x_hat (x) x_hat|^2 expressed through the
/// input-space error s = |x - x_hat|^2 and |x_hat|, for unit-norm x.
double quadratic_error(double s, double recon_norm);

/// 2s - s^2 / 2, valid when |x_hat| is close to 1.
double quadratic_error_approx(double s);

struct TopKGradient {
  double loss = 0.0;  // mean s
  MatrixD d_encoder;
  VectorD d_enc_bias;
  MatrixD d_decoder;
  VectorD d_dec_bias;
};

TopKGradient topk_loss_and_gradient(const TopKModel& model, const MatrixD& x);

/// Mean input-space error, mean product-space error and code density.
struct TopKEvaluation {
  double input_error = 0.0;
  double product_error = 0.0;
  double density = 0.0;
};

TopKEvaluation evaluate_topk(const TopKModel& model, std::span<const ActivationBatch> batches);

struct TopKTrainResult {
  TopKModel model;
  TrainReport report;   // error column holds the product-space error
};

/// Same data handling, optimizer and schedule as the bilinear trainer.
TopKTrainResult train_topk(const TrainConfig& config);

void save_topk_checkpoint(const TopKModel& model, const std::filesystem::path& path);
TopKModel load_topk_checkpoint(const std::filesystem::path& path);

}  // namespace bae
