#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace bae {

using MatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixD = Eigen::MatrixXd;
using VectorD = Eigen::VectorXd;

// Shapes that do not line up (batch vs model, gradient vs parameter, ...).
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Operation not available for the model variant (e.g. missing mixer).
class VariantError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed user input: bad config keys, out-of-range hyperparameters.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Variant : std::uint8_t { vanilla = 0, ordered = 1, mixed = 2, combined = 3, topk = 4 };

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);

inline bool has_mixer(Variant v) { return v == Variant::mixed || v == Variant::combined; }
inline bool is_ordered(Variant v) { return v == Variant::ordered || v == Variant::combined; }

}  // namespace bae
