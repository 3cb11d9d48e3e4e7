#include "bae/trainer.hpp"

#include "bae/io_util.hpp"

#include <cmath>
#include <sstream>

namespace bae {

namespace {

using Index = Eigen::Index;

class MemoryStream final : public BatchStream {
 public:
  MemoryStream(MatrixD rows, std::size_t batch_size) : rows_(std::move(rows)), batch_size_(batch_size) {}

  MatrixD next() override {
    MatrixD out(static_cast<Index>(batch_size_), rows_.cols());
    for (Index r = 0; r < out.rows(); ++r) {
      out.row(r) = rows_.row(cursor_);
      cursor_ = (cursor_ + 1) % rows_.rows();
    }
    return out;
  }
  std::size_t d_in() const override { return static_cast<std::size_t>(rows_.cols()); }

 private:
  MatrixD rows_;
  std::size_t batch_size_;
  Index cursor_ = 0;
};

class DumpStream final : public BatchStream {
 public:
  DumpStream(const std::filesystem::path& path, std::size_t d_in, std::uint64_t end, std::size_t batch_size)
      : reader_(path, d_in), batch_size_(batch_size) {
    reader_.set_range(0, end);
  }

  MatrixD next() override {
    MatrixD out(static_cast<Index>(batch_size_), static_cast<Index>(reader_.header().d_in));
    Index filled = 0;
    std::size_t empty_passes = 0;
    while (filled < out.rows()) {
      MatrixF raw = reader_.next_raw(static_cast<std::size_t>(out.rows() - filled));
      if (raw.rows() == 0) {
        if (++empty_passes > 1) throw std::runtime_error("dump training range contains no usable rows");
        reader_.rewind();
        continue;
      }
      ActivationBatch b = normalize(raw.cast<double>());
      dropped_ += b.dropped;
      if (b.size() > 0) empty_passes = 0;
      out.middleRows(filled, b.rows.rows()) = b.rows;
      filled += b.rows.rows();
    }
    return out;
  }
  std::size_t d_in() const override { return reader_.header().d_in; }
  std::size_t dropped() const override { return dropped_; }

 private:
  DumpReader reader_;
  std::size_t batch_size_;
  std::size_t dropped_ = 0;
};

std::size_t holdout_rows(std::uint64_t total, double frac) {
  auto n = static_cast<std::uint64_t>(std::floor(frac * static_cast<double>(total)));
  if (frac > 0.0 && n < 2 && total >= 4) n = 2;
  return static_cast<std::size_t>(n);
}

void check_finite(std::size_t step, const LossGradient& lg) {
  const bool ok = std::isfinite(lg.loss.error) && std::isfinite(lg.loss.density) && std::isfinite(lg.loss.total) &&
                  lg.d_left.allFinite() && lg.d_right.allFinite() && (!lg.d_mix || lg.d_mix->allFinite());
  if (!ok) {
    std::ostringstream msg;
    msg << "non-finite loss at step " << step << ": error=" << lg.loss.error << " density=" << lg.loss.density
        << " total=" << lg.loss.total;
    throw TrainingError(step, msg.str());
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (variant != Variant::topk) {
    dims.validate();
    if (has_mixer(variant) != dims.d_mix.has_value()) {
      throw ConfigError("d_mix must be set exactly for mixed/combined variants");
    }
  } else if (topk < 1 || topk > dims.d_lat) {
    throw ConfigError("k must be in [1, d_lat]");
  }
  optim.validate();
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
  if (log_every < 1) throw ConfigError("log_every must be >= 1");
  if (!(holdout_frac >= 0.0 && holdout_frac < 1.0)) throw ConfigError("holdout_frac must be in [0, 1)");
  if (!data.dump && !data.synthetic) throw ConfigError("no data source: set a dump path or a synthetic kind");
  if (data.synthetic) {
    data.synthetic->validate();
    if (data.synthetic->d_in != dims.d_in) throw ConfigError("synthetic d_in does not match model d_in");
  }
}

PreparedData prepare_data(const TrainConfig& config) {
  PreparedData out;
  if (config.data.dump) {
    const DumpHeader header = read_dump_header(*config.data.dump);
    if (header.d_in != config.dims.d_in) {
      throw DumpError(DumpError::Kind::dim_mismatch, "dump d_in = " + std::to_string(header.d_in) +
                                                         " but model d_in = " + std::to_string(config.dims.d_in));
    }
    const std::size_t hold = holdout_rows(header.n_rows, config.holdout_frac);
    const std::uint64_t train_end = header.n_rows - hold;
    if (train_end == 0) throw ConfigError("dump has no rows left for training");
    out.train = std::make_unique<DumpStream>(*config.data.dump, config.dims.d_in, train_end, config.batch_size);
    if (hold > 0) {
      DumpReader reader(*config.data.dump, config.dims.d_in);
      reader.set_range(train_end, header.n_rows);
      MatrixF raw = reader.next_raw(hold);
      out.holdout.push_back(normalize(raw.cast<double>()));
    }
  } else {
    const SyntheticData data = generate(*config.data.synthetic, config.data.n_samples);
    const MatrixD& rows = data.batch.rows;
    const std::size_t hold = holdout_rows(static_cast<std::uint64_t>(rows.rows()), config.holdout_frac);
    const Index train_rows = rows.rows() - static_cast<Index>(hold);
    if (train_rows <= 0) throw ConfigError("synthetic stream has no rows left for training");
    out.train = std::make_unique<MemoryStream>(rows.topRows(train_rows), config.batch_size);
    if (hold > 0) {
      ActivationBatch b;
      b.rows = rows.bottomRows(static_cast<Index>(hold));
      out.holdout.push_back(std::move(b));
    }
  }
  return out;
}

TrainResult train(const TrainConfig& config) {
  config.validate();
  if (config.variant == Variant::topk) throw VariantError("topk models are trained with train_topk");
  PreparedData data = prepare_data(config);

  TrainResult result{BilinearModel::orthogonal(config.dims, config.variant, config.seed), {}};
  for (std::size_t s = 0; s < config.optim.steps; ++s) {
    const MatrixD x = data.train->next();
    const double alpha = alpha_at(s, config.alpha, config.optim);
    const LossGradient lg =
        loss_and_gradient(result.model.factors(), x, alpha, config.variant, config.prefix_weights);
    check_finite(s, lg);
    const double lr = lr_at(s, config.optim);
    if (s % config.log_every == 0) {
      result.report.records.push_back({s, lg.loss.error, lg.loss.density, lg.loss.total, lr, alpha});
    }
    step(result.model, Gradients{lg.d_left, lg.d_right, lg.d_mix}, s, config.optim);
  }
  result.report.dropped_rows = data.train->dropped();

  LossOptions options;
  options.prefix_weights = config.prefix_weights;
  options.block_size = config.block_size;
  if (!data.holdout.empty() && data.holdout.front().size() >= 2) {
    result.report.final_eval = evaluate(result.model, data.holdout, options);
  }
  if (!config.checkpoint.empty()) save_checkpoint(result.model, config.checkpoint);
  return result;
}

LossBreakdown evaluate(const BilinearModel& model, std::span<const ActivationBatch> batches,
                       const LossOptions& options) {
  const Factors factors = model.factors();
  const auto d_lat = static_cast<Index>(factors.d_lat());
  double sse_sum = 0.0;
  std::size_t n = 0;
  VectorD l1 = VectorD::Zero(d_lat);
  VectorD sum_sq = VectorD::Zero(d_lat);
  for (const ActivationBatch& batch : batches) {
    if (batch.size() == 0) continue;
    const LatentActivations acts = encode(factors, batch.rows);
    sse_sum += sse_for_variant(factors, acts.f, model.variant(), options).sum();
    l1 += acts.f.cwiseAbs().colwise().sum().transpose();
    sum_sq += acts.f.cwiseAbs2().colwise().sum().transpose();
    n += batch.size();
  }
  if (n == 0) throw std::invalid_argument("evaluate: no samples");
  if (n < 2) throw std::invalid_argument("evaluate: density needs at least 2 samples");

  LossBreakdown out;
  out.error = sse_sum / static_cast<double>(n);
  VectorD dens(d_lat);
  for (Index j = 0; j < d_lat; ++j) dens(j) = hoyer_from_sums(l1(j), sum_sq(j), n);
  out.density = d_lat ? dens.mean() : 0.0;
  out.density_term = d_lat ? density_weights(model.variant(), factors.d_lat()).dot(dens) : 0.0;
  out.total = out.error;
  return out;
}

std::vector<ParetoRow> pareto_sweep(const TrainConfig& config, const std::vector<double>& alphas) {
  if (alphas.empty()) throw ConfigError("alpha list must not be empty");
  std::vector<ParetoRow> rows;
  rows.reserve(alphas.size());
  for (const double alpha : alphas) {
    TrainConfig run = config;
    run.alpha = alpha;
    run.checkpoint.clear();
    const TrainResult result = train(run);
    rows.push_back({alpha, result.report.final_eval.error, result.report.final_eval.density});
  }
  return rows;
}

std::string metrics_csv(const TrainReport& report) {
  std::ostringstream out;
  out << "step,error,density,total,lr,alpha\n";
  for (const StepRecord& r : report.records) {
    out << r.step << ',' << io::fmt(r.error) << ',' << io::fmt(r.density) << ',' << io::fmt(r.total) << ','
        << io::fmt(r.lr) << ',' << io::fmt(r.alpha) << '\n';
  }
  return out.str();
}

std::string pareto_csv(std::span<const ParetoRow> rows) {
  std::ostringstream out;
  out << "alpha,error,density\n";
  for (const ParetoRow& r : rows) out << io::fmt(r.alpha) << ',' << io::fmt(r.error) << ',' << io::fmt(r.density) << '\n';
  return out.str();
}

}  // namespace bae
