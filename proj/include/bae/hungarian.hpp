#pragma once

#include "bae/common.hpp"

#include <vector>

namespace bae {

/// Exact O(n^3) linear assignment (shortest augmenting path with potentials).
/// Returns assignment[row] = column minimising the summed cost of a square
/// cost matrix.
std::vector<std::size_t> solve_assignment_min(const MatrixD& cost);

/// Same, maximising the summed score.
std::vector<std::size_t> solve_assignment_max(const MatrixD& score);

}  // namespace bae
