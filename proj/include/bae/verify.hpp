#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace bae {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;   // worst observed deviation
};

/// Compares the kernel-trick paths with the materialising oracles on random
/// small models (d_in <= 8). Deterministic in `seed`.
std::vector<CheckResult> run_verify(std::uint64_t seed, std::size_t draws);

}  // namespace bae
