#include "bae/similarity.hpp"

#include "bae/hungarian.hpp"
#include "bae/kernels.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace bae {

MatrixD cross_kernel(const Factors& a, const Factors& b) {
  if (a.d_in() != b.d_in()) {
    throw ShapeError("models have different d_in (" + std::to_string(a.d_in()) + " vs " + std::to_string(b.d_in()) +
                     ")");
  }
  return (a.left * b.left.transpose()).cwiseProduct(a.right * b.right.transpose());
}

MatrixD cross_kernel(const BilinearModel& a, const BilinearModel& b) { return cross_kernel(a.factors(), b.factors()); }

double frobenius_similarity(const Factors& a, const Factors& b) {
  const double cross = cross_kernel(a, b).squaredNorm();
  const double self_a = plain_kernel(a).K.squaredNorm();
  const double self_b = plain_kernel(b).K.squaredNorm();
  const double denom = self_a + self_b;
  if (denom == 0.0) return 1.0;  // two zero operators are identical
  return 2.0 * cross / denom;
}

double frobenius_similarity(const BilinearModel& a, const BilinearModel& b) {
  return frobenius_similarity(a.factors(), b.factors());
}

PermutationSimilarity permutation_similarity(const Factors& a, const Factors& b) {
  if (a.d_lat() != b.d_lat()) {
    throw ShapeError("permutation similarity needs equal d_lat (" + std::to_string(a.d_lat()) + " vs " +
                     std::to_string(b.d_lat()) + ")");
  }
  if (a.d_lat() > kMaxAssignmentLatents) {
    throw ConfigError("d_lat exceeds the assignment guard of " + std::to_string(kMaxAssignmentLatents));
  }
  const MatrixD c = cross_kernel(a, b);
  PermutationSimilarity out;
  out.permutation = solve_assignment_max(c);
  double matched = 0.0;
  for (std::size_t i = 0; i < out.permutation.size(); ++i) {
    const double v = c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(out.permutation[i]));
    matched += v * v;
  }
  const double total = c.norm();
  out.value = total == 0.0 ? 0.0 : std::sqrt(matched) / total;
  return out;
}

PermutationSimilarity permutation_similarity(const BilinearModel& a, const BilinearModel& b) {
  return permutation_similarity(a.factors(), b.factors());
}

SelfSimilarity self_similarity_diagonal(const BilinearModel& model) {
  const MatrixD k = plain_kernel(model).K;
  SelfSimilarity out;
  out.per_latent.resize(static_cast<std::size_t>(k.rows()));
  double sum = 0.0;
  std::size_t defined = 0;
  for (Eigen::Index i = 0; i < k.rows(); ++i) {
    const double col = k.col(i).norm();
    if (k(i, i) <= 0.0 || col == 0.0) {
      out.per_latent[static_cast<std::size_t>(i)] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const double v = k(i, i) / col;
    out.per_latent[static_cast<std::size_t>(i)] = v;
    sum += v;
    ++defined;
  }
  out.mean = defined ? sum / static_cast<double>(defined) : std::numeric_limits<double>::quiet_NaN();
  const double total = k.norm();
  out.global = total == 0.0 ? std::numeric_limits<double>::quiet_NaN() : k.diagonal().norm() / total;
  return out;
}

std::string permutation_csv(const PermutationSimilarity& result) {
  std::ostringstream out;
  out << "latent_a,latent_b\n";
  for (std::size_t i = 0; i < result.permutation.size(); ++i) out << i << ',' << result.permutation[i] << '\n';
  return out.str();
}

}  // namespace bae
