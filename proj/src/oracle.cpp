#include "bae/oracle.hpp"

#include <cmath>

namespace bae::oracle {

using Index = Eigen::Index;

MatrixD encoder_matrix(const Factors& factors) {
  const Index d = factors.left.cols();
  MatrixD b(factors.left.rows(), d * d);
  for (Index j = 0; j < b.rows(); ++j)
    for (Index a = 0; a < d; ++a)
      for (Index c = 0; c < d; ++c) b(j, a * d + c) = factors.left(j, a) * factors.right(j, c);
  return b;
}

MatrixD lift(const MatrixD& x) {
  const Index d = x.cols();
  MatrixD out(x.rows(), d * d);
  for (Index s = 0; s < x.rows(); ++s)
    for (Index a = 0; a < d; ++a)
      for (Index c = 0; c < d; ++c) out(s, a * d + c) = x(s, a) * x(s, c);
  return out;
}

MatrixD encode(const Factors& factors, const MatrixD& x) { return lift(x) * encoder_matrix(factors).transpose(); }

MatrixD kernel(const Factors& factors) {
  const MatrixD b = encoder_matrix(factors);
  return b * b.transpose();
}

MatrixD prefix_mask(const VectorD& weights) {
  const Index n = weights.size();
  MatrixD w = MatrixD::Zero(n, n);
  for (Index k = 0; k < n; ++k)
    for (Index i = 0; i <= k; ++i)
      for (Index j = 0; j <= k; ++j) w(i, j) += weights(k);
  return w;
}

VectorD sse(const Factors& factors, const MatrixD& x, const VectorD& weights) {
  const MatrixD b = encoder_matrix(factors);
  const MatrixD lifted = lift(x);
  const MatrixD f = lifted * b.transpose();
  const Index d_lat = b.rows();
  MatrixD mixer_gram = MatrixD::Identity(d_lat, d_lat);
  if (factors.mix) mixer_gram = factors.mix->transpose() * *factors.mix;

  const auto residual = [&](const MatrixD& codes) -> VectorD {
    const MatrixD recon = codes * mixer_gram * b;  // rows are X_hat^T
    return (lifted - recon).rowwise().squaredNorm();
  };
  if (weights.size() == 0) return residual(f);

  if (weights.size() != d_lat) throw ShapeError("prefix weights must have d_lat entries");
  VectorD out = VectorD::Zero(x.rows());
  for (Index k = 0; k < d_lat; ++k) {
    MatrixD masked = f;
    masked.rightCols(d_lat - k - 1).setZero();
    out += weights(k) * residual(masked);
  }
  return out;
}

MatrixD reconstruction_operator(const Factors& factors) {
  const MatrixD b = encoder_matrix(factors);
  return b.transpose() * b;
}

double frobenius_similarity(const Factors& a, const Factors& b) {
  const MatrixD op_a = reconstruction_operator(a);
  const MatrixD op_b = reconstruction_operator(b);
  return 2.0 * (op_a.cwiseProduct(op_b)).sum() / (op_a.squaredNorm() + op_b.squaredNorm());
}

double product_error(const VectorD& x, const VectorD& y) {
  return (x * x.transpose() - y * y.transpose()).squaredNorm();
}

double hoyer(const VectorD& v) {
  const double n = static_cast<double>(v.size());
  double l1 = 0.0, l2 = 0.0;
  for (Index i = 0; i < v.size(); ++i) {
    l1 += std::abs(v(i));
    l2 += v(i) * v(i);
  }
  l2 = std::sqrt(l2);
  if (l2 == 0.0) return 0.0;
  return (l1 / l2 - 1.0) / (std::sqrt(n) - 1.0);
}

}  // namespace bae::oracle
