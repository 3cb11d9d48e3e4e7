#pragma once

// Brute-force references that materialise the product space (d_in^2 columns).
// They exist to cross-check the kernel-trick paths on small dimensions and are
// far too slow for training-size models.

#include "bae/model.hpp"

namespace bae::oracle {

/// d_lat x d_in^2; row j is vec(l_j (x) r_j), column a * d_in + b.
MatrixD encoder_matrix(const Factors& factors);

/// vec(x (x) x) per row.
MatrixD lift(const MatrixD& x);

MatrixD encode(const Factors& factors, const MatrixD& x);

/// B B^T.
MatrixD kernel(const Factors& factors);

/// W[i][j] = sum_k w_k [i <= k][j <= k], by direct summation.
MatrixD prefix_mask(const VectorD& weights);

/// Per-sample |X - X_hat|^2 in the product space. `weights` empty means the
/// plain (unordered) loss; otherwise the weighted sum over every latent
/// prefix. The mixer, when present, maps f to B^T D^T D f.
VectorD sse(const Factors& factors, const MatrixD& x, const VectorD& weights = {});

/// B^T B (d_in^2 x d_in^2).
MatrixD reconstruction_operator(const Factors& factors);

/// 2 Tr(A^T A') / (|A|^2 + |A'|^2) on the materialised operators.
double frobenius_similarity(const Factors& a, const Factors& b);

/// |x (x) x - y (x) y|^2.
double product_error(const VectorD& x, const VectorD& y);

/// Hoyer density straight from the definition.
double hoyer(const VectorD& v);

}  // namespace bae::oracle
