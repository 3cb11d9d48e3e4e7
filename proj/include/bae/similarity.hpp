#pragma once

#include "bae/model.hpp"

#include <vector>

namespace bae {

inline constexpr std::size_t kMaxAssignmentLatents = 8192;

/// C[i][j] = (l_i . l'_j)(r_i . r'_j): inner products between the latent
/// forms of two models.
MatrixD cross_kernel(const Factors& a, const Factors& b);
MatrixD cross_kernel(const BilinearModel& a, const BilinearModel& b);

/// 2 Tr(A^T A') / (|A|_F^2 + |A'|_F^2) for the reconstruction operators
/// A = B^T B, using Tr(A^T A') = |C|_F^2 and |A|_F^2 = |K|_F^2.
double frobenius_similarity(const BilinearModel& a, const BilinearModel& b);
double frobenius_similarity(const Factors& a, const Factors& b);

struct PermutationSimilarity {
  double value = 0.0;
  std::vector<std::size_t> permutation;  // latent i of `a` matched to latent permutation[i] of `b`
};

/// Share of |C|_F carried by the best one-to-one matching of latents.
PermutationSimilarity permutation_similarity(const BilinearModel& a, const BilinearModel& b);
PermutationSimilarity permutation_similarity(const Factors& a, const Factors& b);

struct SelfSimilarity {
  std::vector<double> per_latent;  // NaN for zero-norm latents
  double mean = 0.0;               // over defined entries
  double global = 0.0;             // |diag K|_2 / |K|_F
};

/// Round-trip self-similarity from the model's own kernel K.
///
/// Latent i decodes and re-encodes to the coefficient vector K[:, i]; entry i
/// reports K[i][i] / |K[:, i]|, the share of that round trip landing back on
/// latent i. `global` is the permutation similarity of the model with itself.
SelfSimilarity self_similarity_diagonal(const BilinearModel& model);

std::string permutation_csv(const PermutationSimilarity& result);

}  // namespace bae
