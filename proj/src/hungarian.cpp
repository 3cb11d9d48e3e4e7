#include "bae/hungarian.hpp"

#include <limits>

namespace bae {

std::vector<std::size_t> solve_assignment_min(const MatrixD& cost) {
  if (cost.rows() != cost.cols()) {
    throw ShapeError("assignment needs a square matrix, got " + std::to_string(cost.rows()) + "x" +
                     std::to_string(cost.cols()));
  }
  if (!cost.allFinite()) throw std::invalid_argument("assignment costs must be finite");
  const auto n = static_cast<std::size_t>(cost.rows());
  constexpr double inf = std::numeric_limits<double>::infinity();

  // 1-based potentials u (rows), v (cols); p[col] = row matched to col.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<std::size_t> assignment(n, 0);
  for (std::size_t j = 1; j <= n; ++j) assignment[p[j] - 1] = j - 1;
  return assignment;
}

std::vector<std::size_t> solve_assignment_max(const MatrixD& score) { return solve_assignment_min(-score); }

}  // namespace bae
