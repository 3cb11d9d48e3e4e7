#include "bae/analysis.hpp"

#include "bae/io_util.hpp"
#include "bae/kernels.hpp"
#include "bae/losses.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace bae {

namespace {

using Index = Eigen::Index;

Index idx(std::size_t v) { return static_cast<Index>(v); }

std::size_t count_samples(std::span<const ActivationBatch> batches) {
  std::size_t n = 0;
  for (const auto& b : batches) n += b.size();
  return n;
}

// Second-moment statistics shared by prefix_curve and greedy_reorder:
// H = G .* (E K E) and d_i = (G E)_ii with G = F^T F / N, E = D^T D or I.
struct PrefixStats {
  MatrixD H;
  VectorD d;
};

PrefixStats prefix_stats(const BilinearModel& model, std::span<const ActivationBatch> batches) {
  const Factors factors = model.factors();
  const auto d_lat = idx(factors.d_lat());
  MatrixD gram = MatrixD::Zero(d_lat, d_lat);
  std::size_t n = 0;
  for (const auto& b : batches) {
    if (b.size() == 0) continue;
    const MatrixD f = encode(factors, b.rows).f;
    gram.noalias() += f.transpose() * f;
    n += b.size();
  }
  if (n == 0) throw std::invalid_argument("prefix analysis needs at least one sample");
  gram /= static_cast<double>(n);

  const MatrixD K = plain_kernel(factors).K;
  PrefixStats out;
  if (factors.mix) {
    const MatrixD E = factors.mix->transpose() * *factors.mix;
    out.H = gram.cwiseProduct(E * K * E);
    out.d = (gram * E).diagonal();
  } else {
    out.H = gram.cwiseProduct(K);
    out.d = gram.diagonal();
  }
  return out;
}

}  // namespace

std::size_t Histogram::total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

Histogram make_histogram(std::span<const double> values, std::size_t bins, double lo, double hi) {
  if (bins == 0) throw ConfigError("histogram needs at least one bin");
  Histogram h;
  if (!(hi > lo)) {
    h.edges = {lo, hi};
    h.counts = {values.size()};
    return h;
  }
  h.edges.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) h.edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  h.counts.assign(bins, 0);
  for (const double v : values) {
    auto b = static_cast<std::ptrdiff_t>(std::floor((v - lo) / (hi - lo) * static_cast<double>(bins)));
    b = std::clamp<std::ptrdiff_t>(b, 0, static_cast<std::ptrdiff_t>(bins) - 1);
    ++h.counts[static_cast<std::size_t>(b)];
  }
  return h;
}

Histogram make_log_histogram(std::span<const double> values, std::size_t bins) {
  if (bins == 0) throw ConfigError("histogram needs at least one bin");
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const double v : values) {
    if (v > 0.0) lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  Histogram h;
  if (!(hi > 0.0) || !(hi > lo)) {
    const double at = hi > 0.0 ? hi : 0.0;
    h.edges = {at, at};
    h.counts = {values.size()};
    return h;
  }
  const double log_lo = std::log10(lo), log_hi = std::log10(hi);
  h.edges.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) {
    h.edges[i] = std::pow(10.0, log_lo + (log_hi - log_lo) * static_cast<double>(i) / static_cast<double>(bins));
  }
  h.counts.assign(bins, 0);
  for (const double v : values) {
    std::ptrdiff_t b = 0;
    if (v > 0.0) b = static_cast<std::ptrdiff_t>(std::floor((std::log10(v) - log_lo) / (log_hi - log_lo) * static_cast<double>(bins)));
    b = std::clamp<std::ptrdiff_t>(b, 0, static_cast<std::ptrdiff_t>(bins) - 1);
    ++h.counts[static_cast<std::size_t>(b)];
  }
  return h;
}

double sorted_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile level must be in [0, 1]");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto below = static_cast<std::size_t>(std::floor(pos));
  const std::size_t above = std::min(below + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(below);
  return sorted[below] + frac * (sorted[above] - sorted[below]);
}

DensityHistogram density_histogram(const BilinearModel& model, std::span<const ActivationBatch> batches,
                                   std::size_t bins, double dense_threshold) {
  const std::size_t n = count_samples(batches);
  if (n < 2) throw std::invalid_argument("density histogram needs at least 2 samples");
  const Factors factors = model.factors();
  const auto d_lat = idx(factors.d_lat());
  VectorD l1 = VectorD::Zero(d_lat), sum_sq = VectorD::Zero(d_lat);
  for (const auto& b : batches) {
    if (b.size() == 0) continue;
    const MatrixD f = encode(factors, b.rows).f;
    l1 += f.cwiseAbs().colwise().sum().transpose();
    sum_sq += f.cwiseAbs2().colwise().sum().transpose();
  }
  DensityHistogram out;
  out.densities.resize(d_lat);
  std::size_t dense = 0;
  for (Index j = 0; j < d_lat; ++j) {
    out.densities(j) = hoyer_from_sums(l1(j), sum_sq(j), n);
    if (out.densities(j) > dense_threshold) ++dense;
  }
  out.histogram = make_histogram(std::span<const double>(out.densities.data(), static_cast<std::size_t>(d_lat)), bins,
                                 0.0, 1.0);
  out.dense_fraction = d_lat ? static_cast<double>(dense) / static_cast<double>(d_lat) : 0.0;
  return out;
}

MatrixD interaction_matrix(const BilinearModel& model) {
  if (model.mix()) {
    const MatrixD D = model.mix()->cast<double>();
    return D.transpose() * D;
  }
  return plain_kernel(model).K;
}

VectorD cluster_scores(const BilinearModel& model) {
  const MatrixD inter = interaction_matrix(model);
  VectorD out(inter.rows());
  if (inter.cols() < 2) {
    out.setZero();
    return out;
  }
  for (Index i = 0; i < inter.rows(); ++i) {
    const VectorD sharpened = inter.row(i).transpose().array().square().square();
    out(i) = hoyer_density(sharpened);
  }
  return out;
}

CompositeLatent composite_from_members(const Factors& factors, std::vector<std::size_t> members, VectorD weights) {
  if (members.empty()) throw std::invalid_argument("composite latent needs at least one member");
  if (static_cast<std::size_t>(weights.size()) != members.size()) throw ShapeError("one weight per member required");
  const auto d_in = idx(factors.d_in());
  CompositeLatent out;
  out.form = MatrixD::Zero(d_in, d_in);
  for (std::size_t m = 0; m < members.size(); ++m) {
    if (members[m] >= factors.d_lat()) throw std::out_of_range("composite member out of range");
    const Index j = idx(members[m]);
    out.form.noalias() += weights(idx(m)) * factors.left.row(j).transpose() * factors.right.row(j);
  }
  out.form_sym = 0.5 * (out.form + out.form.transpose());
  out.members = std::move(members);
  out.weights = std::move(weights);

  Eigen::SelfAdjointEigenSolver<MatrixD> solver(out.form_sym);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
  std::vector<Index> order(static_cast<std::size_t>(d_in));
  std::iota(order.begin(), order.end(), 0);
  const VectorD& vals = solver.eigenvalues();
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return std::abs(vals(a)) > std::abs(vals(b)); });
  out.eigenvalues.resize(d_in);
  out.eigenvectors.resize(d_in, d_in);
  for (Index k = 0; k < d_in; ++k) {
    out.eigenvalues(k) = vals(order[static_cast<std::size_t>(k)]);
    out.eigenvectors.col(k) = solver.eigenvectors().col(order[static_cast<std::size_t>(k)]);
  }
  out.basis = MatrixD::Zero(3, d_in);
  for (Index k = 0; k < std::min<Index>(3, d_in); ++k) out.basis.row(k) = out.eigenvectors.col(k).transpose();
  return out;
}

namespace {

std::vector<std::size_t> top_members(const MatrixD& inter, std::size_t row, std::size_t top_k) {
  const auto r = idx(row);
  std::vector<std::size_t> order(static_cast<std::size_t>(inter.cols()));
  std::iota(order.begin(), order.end(), 0);
  const std::size_t keep = std::min(top_k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double va = std::abs(inter(r, idx(a))), vb = std::abs(inter(r, idx(b)));
                      return va != vb ? va > vb : a < b;
                    });
  order.resize(keep);
  return order;
}

}  // namespace

CompositeLatent build_composite(const BilinearModel& model, std::size_t seed_row, std::size_t top_k) {
  const MatrixD inter = interaction_matrix(model);
  if (seed_row >= static_cast<std::size_t>(inter.rows())) throw std::out_of_range("seed row out of range");
  if (top_k == 0) throw ConfigError("top_k must be >= 1");
  std::vector<std::size_t> members = top_members(inter, seed_row, top_k);
  VectorD weights(idx(members.size()));
  for (std::size_t m = 0; m < members.size(); ++m) weights(idx(m)) = inter(idx(seed_row), idx(members[m]));
  return composite_from_members(model.factors(), std::move(members), std::move(weights));
}

std::vector<std::size_t> rank_candidates(const BilinearModel& model, std::size_t max_candidates, std::size_t top_k,
                                         std::size_t max_shared) {
  const MatrixD inter = interaction_matrix(model);
  const VectorD scores = cluster_scores(model);
  std::vector<std::size_t> rows(static_cast<std::size_t>(scores.size()));
  std::iota(rows.begin(), rows.end(), 0);
  std::stable_sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) { return scores(idx(a)) > scores(idx(b)); });

  std::vector<std::size_t> chosen;
  std::vector<std::set<std::size_t>> chosen_members;
  for (const std::size_t row : rows) {
    if (chosen.size() >= max_candidates) break;
    const auto members = top_members(inter, row, top_k);
    const std::set<std::size_t> set(members.begin(), members.end());
    bool duplicate = false;
    for (const auto& prev : chosen_members) {
      std::size_t shared = 0;
      for (const std::size_t m : set) shared += prev.count(m);
      if (shared > max_shared) {
        duplicate = true;
        break;
      }
    }
    if (duplicate) continue;
    chosen.push_back(row);
    chosen_members.push_back(set);
  }
  return chosen;
}

MatrixD project_onto(const MatrixD& rows, const MatrixD& basis) {
  if (rows.cols() != basis.cols()) throw ShapeError("projection basis and inputs disagree on d_in");
  return rows * basis.transpose();
}

ManifoldExport export_manifold(const BilinearModel& model, const CompositeLatent& composite,
                               std::span<const ActivationBatch> batches, double top_fraction) {
  if (!(top_fraction > 0.0 && top_fraction <= 1.0)) throw ConfigError("top_fraction must be in (0, 1]");
  const std::size_t n = count_samples(batches);
  if (n == 0) throw std::invalid_argument("export_manifold: no samples");
  const Factors factors = model.factors();

  MatrixD points(idx(n), 3);
  VectorD strength(idx(n));
  std::vector<std::string> tags;
  bool have_tags = true;
  Index row = 0;
  for (const auto& b : batches) {
    if (b.size() == 0) continue;
    const MatrixD f = encode(factors, b.rows).f;
    for (Index s = 0; s < f.rows(); ++s) {
      double sq = 0.0;
      for (const std::size_t m : composite.members) sq += f(s, idx(m)) * f(s, idx(m));
      strength(row + s) = std::sqrt(sq);
    }
    points.middleRows(row, f.rows()) = project_onto(b.rows, composite.basis);
    row += f.rows();
    if (b.tags.size() != b.size()) have_tags = false;
    if (have_tags) tags.insert(tags.end(), b.tags.begin(), b.tags.end());
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return strength(idx(a)) > strength(idx(b)); });
  const auto keep = std::max<std::size_t>(
      1, std::min<std::size_t>(n, static_cast<std::size_t>(std::ceil(top_fraction * static_cast<double>(n) - 1e-9))));

  ManifoldExport out;
  out.basis = composite.basis;
  out.points.resize(idx(keep), 3);
  out.strength.resize(idx(keep));
  for (std::size_t i = 0; i < keep; ++i) {
    out.points.row(idx(i)) = points.row(idx(order[i]));
    out.strength(idx(i)) = strength(idx(order[i]));
    if (have_tags) out.tags.push_back(tags[order[i]]);
  }
  return out;
}

std::string manifold_json(const ManifoldExport& manifold) {
  nlohmann::ordered_json j;
  auto rows_of = [](const MatrixD& m) {
    nlohmann::json arr = nlohmann::json::array();
    for (Index r = 0; r < m.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
      arr.push_back(std::move(row));
    }
    return arr;
  };
  j["basis"] = rows_of(manifold.basis);
  j["points"] = rows_of(manifold.points);
  j["strength"] = std::vector<double>(manifold.strength.data(), manifold.strength.data() + manifold.strength.size());
  j["tags"] = manifold.tags;
  return j.dump() + "\n";
}

std::string manifold_csv(const ManifoldExport& manifold) {
  std::ostringstream out;
  out << "x,y,z,strength,tag\n";
  for (Index i = 0; i < manifold.points.rows(); ++i) {
    out << io::fmt(manifold.points(i, 0)) << ',' << io::fmt(manifold.points(i, 1)) << ','
        << io::fmt(manifold.points(i, 2)) << ',' << io::fmt(manifold.strength(i)) << ',';
    if (static_cast<std::size_t>(i) < manifold.tags.size()) out << manifold.tags[static_cast<std::size_t>(i)];
    out << '\n';
  }
  return out.str();
}

VectorD prefix_curve(const BilinearModel& model, std::span<const ActivationBatch> batches) {
  const PrefixStats stats = prefix_stats(model, batches);
  const Index d_lat = stats.H.rows();
  VectorD curve(d_lat);
  double err = 1.0;
  for (Index k = 0; k < d_lat; ++k) {
    // Adding latent k contributes its diagonal, twice its overlap with the
    // latents already present, and its cross term with the target.
    err += stats.H(k, k) + 2.0 * stats.H.row(k).head(k).sum() - 2.0 * stats.d(k);
    curve(k) = err;
  }
  return curve;
}

GreedyOrder greedy_reorder(const BilinearModel& model, std::span<const ActivationBatch> batches) {
  if (model.d_lat() > kMaxGreedyLatents) {
    throw ConfigError("greedy reordering is limited to d_lat <= " + std::to_string(kMaxGreedyLatents));
  }
  const PrefixStats stats = prefix_stats(model, batches);
  const Index d_lat = stats.H.rows();
  VectorD overlap = VectorD::Zero(d_lat);
  std::vector<char> used(static_cast<std::size_t>(d_lat), 0);
  GreedyOrder out;
  out.curve.resize(d_lat);
  double err = 1.0;
  for (Index t = 0; t < d_lat; ++t) {
    Index best = -1;
    double best_delta = 0.0;
    for (Index j = 0; j < d_lat; ++j) {
      if (used[static_cast<std::size_t>(j)]) continue;
      const double delta = stats.H(j, j) + 2.0 * overlap(j) - 2.0 * stats.d(j);
      if (best < 0 || delta < best_delta) {
        best = j;
        best_delta = delta;
      }
    }
    used[static_cast<std::size_t>(best)] = 1;
    overlap += stats.H.col(best);
    err += best_delta;
    out.curve(t) = err;
    out.permutation.push_back(static_cast<std::size_t>(best));
  }
  return out;
}

ActivationHistogram activation_histogram(const BilinearModel& model, std::span<const ActivationBatch> batches,
                                         std::size_t latent, std::size_t bins, bool log_scale) {
  if (latent >= model.d_lat()) throw std::out_of_range("latent index out of range");
  const Factors factors = model.factors();
  std::vector<double> magnitudes;
  magnitudes.reserve(count_samples(batches));
  const Index j = idx(latent);
  for (const auto& b : batches) {
    if (b.size() == 0) continue;
    const VectorD a = b.rows * factors.left.row(j).transpose();
    const VectorD c = b.rows * factors.right.row(j).transpose();
    for (Index s = 0; s < a.size(); ++s) magnitudes.push_back(std::abs(a(s) * c(s)));
  }
  ActivationHistogram out;
  out.samples = magnitudes.size();
  if (magnitudes.empty()) return out;
  const double hi = *std::max_element(magnitudes.begin(), magnitudes.end());
  out.histogram = log_scale ? make_log_histogram(magnitudes, bins) : make_histogram(magnitudes, bins, 0.0, hi);
  std::sort(magnitudes.begin(), magnitudes.end());
  for (const double q : {0.5, 0.9, 0.99, 0.999}) out.quantiles.emplace_back(q, sorted_quantile(magnitudes, q));
  return out;
}

std::string histogram_csv(const Histogram& histogram) {
  std::ostringstream out;
  out << "lo,hi,count\n";
  for (std::size_t i = 0; i < histogram.counts.size(); ++i) {
    out << io::fmt(histogram.edges[i]) << ',' << io::fmt(histogram.edges[i + 1]) << ',' << histogram.counts[i] << '\n';
  }
  return out.str();
}

}  // namespace bae
