#pragma once

#include "bae/data.hpp"
#include "bae/model.hpp"

#include <span>
#include <string>
#include <vector>

namespace bae {

struct Histogram {
  std::vector<double> edges;          // bins + 1 entries
  std::vector<std::size_t> counts;    // bins entries

  std::size_t total() const;
};

/// Equal-width bins over [lo, hi]; values outside are clamped into the end bins.
Histogram make_histogram(std::span<const double> values, std::size_t bins, double lo, double hi);

/// Geometric bins from the smallest positive value to the largest; exact
/// zeros fall into the first bin.
Histogram make_log_histogram(std::span<const double> values, std::size_t bins);

/// Linear-interpolated quantile of already-sorted values, q in [0, 1].
double sorted_quantile(std::span<const double> sorted, double q);

// --- densities -------------------------------------------------------------

inline constexpr double kDenseThreshold = 0.5;

struct DensityHistogram {
  VectorD densities;       // per latent, across all samples
  Histogram histogram;     // over [0, 1]
  double dense_fraction = 0.0;
};

DensityHistogram density_histogram(const BilinearModel& model, std::span<const ActivationBatch> batches,
                                   std::size_t bins, double dense_threshold = kDenseThreshold);

// --- manifold discovery ------------------------------------------------------

/// D^T D for mixing variants; the plain kernel otherwise.
MatrixD interaction_matrix(const BilinearModel& model);

/// Hoyer density of each row of the interaction matrix after an element-wise
/// fourth power. High scores mark rows with several similar-sized entries.
VectorD cluster_scores(const BilinearModel& model);

struct CompositeLatent {
  std::vector<std::size_t> members;
  VectorD weights;       // signed interaction entries of the members
  MatrixD form;          // sum_j w_j l_j r_j^T
  MatrixD form_sym;      // (form + form^T) / 2
  VectorD eigenvalues;   // sorted by |value|, descending
  MatrixD eigenvectors;  // columns, same order
  MatrixD basis;         // 3 x d_in, leading eigenvectors as rows (zero rows pad d_in < 3)
};

inline constexpr std::size_t kCompositeMembers = 10;

CompositeLatent composite_from_members(const Factors& factors, std::vector<std::size_t> members, VectorD weights);

/// Top-|entry| members of row `seed_row` of the interaction matrix, weighted by
/// those entries.
CompositeLatent build_composite(const BilinearModel& model, std::size_t seed_row,
                                std::size_t top_k = kCompositeMembers);

/// Rows by descending cluster score, skipping rows whose member set shares
/// more than `max_shared` latents with an already selected candidate.
std::vector<std::size_t> rank_candidates(const BilinearModel& model, std::size_t max_candidates,
                                         std::size_t top_k = kCompositeMembers, std::size_t max_shared = 5);

struct ManifoldExport {
  MatrixD basis;                   // 3 x d_in
  MatrixD points;                  // n x 3
  VectorD strength;                // L2 norm of member activations
  std::vector<std::string> tags;   // empty when inputs carry none
};

inline constexpr double kDefaultTopFraction = 0.25;

/// rows * basis^T.
MatrixD project_onto(const MatrixD& rows, const MatrixD& basis);

/// Projects the strongest `top_fraction` of inputs onto the composite's
/// leading 3D eigen-subspace. Points are ordered by descending strength.
ManifoldExport export_manifold(const BilinearModel& model, const CompositeLatent& composite,
                               std::span<const ActivationBatch> batches, double top_fraction = kDefaultTopFraction);

std::string manifold_json(const ManifoldExport& manifold);
std::string manifold_csv(const ManifoldExport& manifold);

// --- prefix reconstruction ---------------------------------------------------

/// Entry k: mean SSE using latents 0..k only (mask applied before mixing).
VectorD prefix_curve(const BilinearModel& model, std::span<const ActivationBatch> batches);

inline constexpr std::size_t kMaxGreedyLatents = 4096;

struct GreedyOrder {
  std::vector<std::size_t> permutation;
  VectorD curve;
};

/// Adds, one at a time, the latent that lowers the reconstruction error most.
GreedyOrder greedy_reorder(const BilinearModel& model, std::span<const ActivationBatch> batches);

// --- activation histogram ----------------------------------------------------

struct ActivationHistogram {
  Histogram histogram;                               // over |f_j|
  std::vector<std::pair<double, double>> quantiles;  // (q, value)
  std::size_t samples = 0;
};

ActivationHistogram activation_histogram(const BilinearModel& model, std::span<const ActivationBatch> batches,
                                         std::size_t latent, std::size_t bins, bool log_scale);

std::string histogram_csv(const Histogram& histogram);

}  // namespace bae
