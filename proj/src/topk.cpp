#include "bae/topk.hpp"

#include "bae/io_util.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace bae {

namespace {

using Index = Eigen::Index;

bool same_bits(const float* a, const float* b, Index n) {
  return std::memcmp(a, b, static_cast<std::size_t>(n) * sizeof(float)) == 0;
}

void update_vector(Eigen::VectorXf& param, const VectorD& gradient, double lr, int ns_iters) {
  const MatrixD row = gradient.transpose();
  const MatrixD step = orthogonalize(row, ns_iters) * lr;
  param -= step.row(0).transpose().cast<float>();
}

}  // namespace

TopKModel TopKModel::init(std::size_t d_in, std::size_t d_lat, std::size_t k, std::uint64_t seed) {
  if (d_in < 1 || d_lat < 1) throw ConfigError("topk dimensions must be >= 1");
  TopKModel m;
  m.encoder = semi_orthogonal(d_lat, d_in, seed).cast<float>();
  m.enc_bias = Eigen::VectorXf::Zero(static_cast<Index>(d_lat));
  m.decoder = m.encoder.transpose();
  m.dec_bias = Eigen::VectorXf::Zero(static_cast<Index>(d_in));
  m.k = k;
  m.validate();
  m.normalize_decoder();
  return m;
}

void TopKModel::validate() const {
  if (k < 1 || k > d_lat()) {
    throw ConfigError("k = " + std::to_string(k) + " must be in [1, d_lat = " + std::to_string(d_lat()) + "]");
  }
  if (static_cast<std::size_t>(decoder.rows()) != d_in() || static_cast<std::size_t>(decoder.cols()) != d_lat() ||
      static_cast<std::size_t>(enc_bias.size()) != d_lat() || static_cast<std::size_t>(dec_bias.size()) != d_in()) {
    throw ShapeError("inconsistent topk parameter shapes");
  }
}

void TopKModel::normalize_decoder() {
  for (Index c = 0; c < decoder.cols(); ++c) {
    const float n = decoder.col(c).norm();
    if (n > 0.0f) decoder.col(c) /= n;
  }
}

bool TopKModel::operator==(const TopKModel& other) const {
  return k == other.k && encoder.rows() == other.encoder.rows() && encoder.cols() == other.encoder.cols() &&
         same_bits(encoder.data(), other.encoder.data(), encoder.size()) &&
         same_bits(decoder.data(), other.decoder.data(), decoder.size()) &&
         same_bits(enc_bias.data(), other.enc_bias.data(), enc_bias.size()) &&
         same_bits(dec_bias.data(), other.dec_bias.data(), dec_bias.size());
}

TopKOutput topk_forward(const TopKModel& model, const MatrixD& x) {
  model.validate();
  if (static_cast<std::size_t>(x.cols()) != model.d_in()) throw ShapeError("batch d_in does not match topk model");
  const MatrixD enc = model.encoder.cast<double>();
  const MatrixD dec = model.decoder.cast<double>();
  const MatrixD pre = (x * enc.transpose()).rowwise() + model.enc_bias.cast<double>().transpose();

  TopKOutput out;
  out.codes = MatrixD::Zero(pre.rows(), pre.cols());
  std::vector<Index> order(static_cast<std::size_t>(pre.cols()));
  const auto k = static_cast<std::ptrdiff_t>(model.k);
  for (Index s = 0; s < pre.rows(); ++s) {
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](Index a, Index b) {
      const double va = pre(s, a), vb = pre(s, b);
      return va != vb ? va > vb : a < b;
    });
    for (std::ptrdiff_t i = 0; i < k; ++i) out.codes(s, order[static_cast<std::size_t>(i)]) = pre(s, order[static_cast<std::size_t>(i)]);
  }
  out.reconstruction = (out.codes * dec.transpose()).rowwise() + model.dec_bias.cast<double>().transpose();
  out.sse = (x - out.reconstruction).rowwise().squaredNorm();
  return out;
}

double quadratic_error(double s, double recon_norm) {
  if (!(s >= 0.0)) throw std::invalid_argument("input-space error must be >= 0");
  const double r2 = recon_norm * recon_norm;
  return 0.5 * (1.0 - r2) * (1.0 - r2) + s * (1.0 + r2) - 0.5 * s * s;
}

double quadratic_error_approx(double s) { return 2.0 * s - 0.5 * s * s; }

TopKGradient topk_loss_and_gradient(const TopKModel& model, const MatrixD& x) {
  const TopKOutput fwd = topk_forward(model, x);
  const double n = static_cast<double>(x.rows());
  const MatrixD dec = model.decoder.cast<double>();

  TopKGradient g;
  g.loss = fwd.sse.mean();
  const MatrixD d_recon = (2.0 / n) * (fwd.reconstruction - x);
  g.d_decoder = d_recon.transpose() * fwd.codes;
  g.d_dec_bias = d_recon.colwise().sum().transpose();
  MatrixD d_codes = d_recon * dec;
  for (Index s = 0; s < d_codes.rows(); ++s)
    for (Index j = 0; j < d_codes.cols(); ++j)
      if (fwd.codes(s, j) == 0.0) d_codes(s, j) = 0.0;
  g.d_encoder = d_codes.transpose() * x;
  g.d_enc_bias = d_codes.colwise().sum().transpose();
  return g;
}

TopKEvaluation evaluate_topk(const TopKModel& model, std::span<const ActivationBatch> batches) {
  TopKEvaluation out;
  std::size_t n = 0;
  const auto d_lat = static_cast<Index>(model.d_lat());
  VectorD l1 = VectorD::Zero(d_lat), sum_sq = VectorD::Zero(d_lat);
  for (const auto& b : batches) {
    if (b.size() == 0) continue;
    const TopKOutput fwd = topk_forward(model, b.rows);
    for (Index s = 0; s < fwd.sse.size(); ++s) {
      out.input_error += fwd.sse(s);
      out.product_error += quadratic_error(fwd.sse(s), fwd.reconstruction.row(s).norm());
    }
    l1 += fwd.codes.cwiseAbs().colwise().sum().transpose();
    sum_sq += fwd.codes.cwiseAbs2().colwise().sum().transpose();
    n += b.size();
  }
  if (n < 2) throw std::invalid_argument("topk evaluation needs at least 2 samples");
  out.input_error /= static_cast<double>(n);
  out.product_error /= static_cast<double>(n);
  double dens = 0.0;
  for (Index j = 0; j < d_lat; ++j) dens += hoyer_from_sums(l1(j), sum_sq(j), n);
  out.density = dens / static_cast<double>(d_lat);
  return out;
}

TopKTrainResult train_topk(const TrainConfig& config) {
  config.validate();
  if (config.variant != Variant::topk) throw VariantError("train_topk needs variant topk");
  PreparedData data = prepare_data(config);
  TopKTrainResult result{TopKModel::init(config.dims.d_in, config.dims.d_lat, config.topk, config.seed), {}};
  TopKModel& m = result.model;
  for (std::size_t s = 0; s < config.optim.steps; ++s) {
    const MatrixD x = data.train->next();
    const TopKGradient g = topk_loss_and_gradient(m, x);
    if (!std::isfinite(g.loss) || !g.d_encoder.allFinite() || !g.d_decoder.allFinite()) {
      throw TrainingError(s, "non-finite topk loss at step " + std::to_string(s));
    }
    const double lr = lr_at(s, config.optim);
    if (s % config.log_every == 0) {
      result.report.records.push_back({s, 2.0 * g.loss - 0.5 * g.loss * g.loss, 0.0, g.loss, lr, 0.0});
    }
    apply_update(m.encoder, g.d_encoder, lr, config.optim.ns_iters);
    apply_update(m.decoder, g.d_decoder, lr, config.optim.ns_iters);
    update_vector(m.enc_bias, g.d_enc_bias, lr, config.optim.ns_iters);
    update_vector(m.dec_bias, g.d_dec_bias, lr, config.optim.ns_iters);
    m.normalize_decoder();
  }
  result.report.dropped_rows = data.train->dropped();
  if (!data.holdout.empty() && data.holdout.front().size() >= 2) {
    const TopKEvaluation ev = evaluate_topk(m, data.holdout);
    result.report.final_eval.error = ev.product_error;
    result.report.final_eval.density = ev.density;
    result.report.final_eval.density_term = ev.density;
    result.report.final_eval.total = ev.product_error;
  }
  if (!config.checkpoint.empty()) save_topk_checkpoint(m, config.checkpoint);
  return result;
}

void save_topk_checkpoint(const TopKModel& model, const std::filesystem::path& path) {
  model.validate();
  CheckpointHeader h;
  h.variant = Variant::topk;
  h.d_in = static_cast<std::uint32_t>(model.d_in());
  h.d_lat = static_cast<std::uint32_t>(model.d_lat());
  h.d_mix = static_cast<std::uint32_t>(model.k);
  io::atomic_write(
      path,
      [&](std::ostream& out) {
        write_checkpoint_header(out, h);
        io::write_f32_block(out, model.encoder.data(), static_cast<std::size_t>(model.encoder.size()));
        io::write_f32_block(out, model.enc_bias.data(), static_cast<std::size_t>(model.enc_bias.size()));
        io::write_f32_block(out, model.decoder.data(), static_cast<std::size_t>(model.decoder.size()));
        io::write_f32_block(out, model.dec_bias.data(), static_cast<std::size_t>(model.dec_bias.size()));
      },
      /*binary=*/true);
}

TopKModel load_topk_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  const CheckpointHeader h = read_checkpoint_header(in);
  if (h.variant != Variant::topk) throw VariantError("checkpoint does not hold a topk model");
  TopKModel m;
  m.k = h.d_mix;
  m.encoder.resize(h.d_lat, h.d_in);
  m.enc_bias.resize(h.d_lat);
  m.decoder.resize(h.d_in, h.d_lat);
  m.dec_bias.resize(h.d_in);
  io::read_f32_block(in, m.encoder.data(), static_cast<std::size_t>(m.encoder.size()), "topk encoder");
  io::read_f32_block(in, m.enc_bias.data(), static_cast<std::size_t>(m.enc_bias.size()), "topk encoder bias");
  io::read_f32_block(in, m.decoder.data(), static_cast<std::size_t>(m.decoder.size()), "topk decoder");
  io::read_f32_block(in, m.dec_bias.data(), static_cast<std::size_t>(m.dec_bias.size()), "topk decoder bias");
  m.validate();
  return m;
}

}  // namespace bae
