#pragma once

#include "bae/model.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>

namespace bae::testing {

inline MatrixD gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  MatrixD m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

inline MatrixD unit_rows(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  MatrixD m = gaussian(rng, rows, cols);
  m.rowwise().normalize();
  return m;
}

inline Factors random_factors(std::mt19937_64& rng, Eigen::Index d_in, Eigen::Index d_lat, Eigen::Index d_mix = 0,
                              double scale = 0.5) {
  Factors f;
  f.left = gaussian(rng, d_lat, d_in, scale);
  f.right = gaussian(rng, d_lat, d_in, scale);
  if (d_mix > 0) f.mix = gaussian(rng, d_mix, d_lat, scale);
  return f;
}

inline BilinearModel to_model(const Factors& f, Variant v) {
  std::optional<MatrixF> mix;
  if (f.mix) mix = f.mix->cast<float>();
  return BilinearModel(v, f.left.cast<float>(), f.right.cast<float>(), mix);
}

// Per-test scratch directory under the build tree's temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("bae_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(1e-12, std::max(std::abs(a), std::abs(b)));
}

}  // namespace bae::testing
