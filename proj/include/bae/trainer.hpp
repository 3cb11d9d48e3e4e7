#pragma once

#include "bae/data.hpp"
#include "bae/losses.hpp"
#include "bae/optimizer.hpp"

#include <filesystem>
#include <memory>
#include <span>

namespace bae {

struct DataSource {
  std::optional<std::filesystem::path> dump;
  std::optional<SyntheticSpec> synthetic;
  std::size_t n_samples = 16384;  // synthetic only
};

struct TrainConfig {
  ModelDims dims;
  Variant variant = Variant::vanilla;
  double alpha = 0.1;
  OptimConfig optim;
  DataSource data;
  std::size_t batch_size = 256;
  std::size_t log_every = 16;
  std::filesystem::path checkpoint;  // empty: no checkpoint written
  std::uint64_t seed = 0;            // model initialisation
  std::size_t block_size = kDefaultBlockSize;
  std::size_t topk = 50;             // topk variant only
  VectorD prefix_weights;            // ordered variants; empty means uniform
  double holdout_frac = 0.05;        // tail of the stream kept for evaluation

  void validate() const;
};

struct StepRecord {
  std::size_t step = 0;
  double error = 0.0;
  double density = 0.0;
  double total = 0.0;
  double lr = 0.0;
  double alpha = 0.0;
};

struct TrainReport {
  std::vector<StepRecord> records;
  LossBreakdown final_eval;   // on the held-out slice
  std::size_t dropped_rows = 0;
};

struct TrainResult {
  BilinearModel model;
  TrainReport report;
};

/// Raised when a loss term turns non-finite; carries the step for diagnosis.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(std::size_t step, const std::string& what) : std::runtime_error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// Endless batches of normalised rows drawn in stream order (wrapping around).
class BatchStream {
 public:
  virtual ~BatchStream() = default;
  virtual MatrixD next() = 0;
  virtual std::size_t d_in() const = 0;
  virtual std::size_t dropped() const { return 0; }
};

/// Training stream plus the held-out evaluation rows for a data source.
struct PreparedData {
  std::unique_ptr<BatchStream> train;
  std::vector<ActivationBatch> holdout;
};

PreparedData prepare_data(const TrainConfig& config);

TrainResult train(const TrainConfig& config);

/// Same error and density as the training objective, accumulated over all
/// rows of `batches`, without alpha weighting.
LossBreakdown evaluate(const BilinearModel& model, std::span<const ActivationBatch> batches,
                       const LossOptions& options = {});

struct ParetoRow {
  double alpha = 0.0;
  double error = 0.0;
  double density = 0.0;
};

/// One train + evaluate per alpha.
std::vector<ParetoRow> pareto_sweep(const TrainConfig& config, const std::vector<double>& alphas);

std::string metrics_csv(const TrainReport& report);
std::string pareto_csv(std::span<const ParetoRow> rows);

}  // namespace bae
