#pragma once

// Differentiable operations over Tensor. Every op validates shapes and throws
// ConfigError naming the offending shapes.

#include "mebm/tensor.hpp"

#include <cstdint>
#include <span>

namespace mebm::ops {

// out[i,j] = Σ_k x[i,k]·W[k,j] + b[j]
Tensor affine(const Tensor& x, const Tensor& weight, const Tensor& bias);

// max(x, slope·x); the gradient at 0 takes the positive branch.
Tensor leaky_relu(const Tensor& x, double slope);

// Row-wise log Σ exp over a B×C matrix, max-shifted. Returns shape [B].
Tensor logsumexp(const Tensor& logits);

// Row-wise softmax of a B×C matrix.
Tensor softmax(const Tensor& logits);

// mean_i ( logsumexp(logits[i]) − logits[i, labels[i]] )
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::int32_t> labels);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor square(const Tensor& a);
Tensor sum(const Tensor& a);
// [B×D] → [B]
Tensor row_sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

}  // namespace mebm::ops

namespace mebm {

inline Tensor operator+(const Tensor& a, const Tensor& b) { return ops::add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return ops::sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return ops::mul(a, b); }
inline Tensor operator*(double c, const Tensor& a) { return ops::scale(a, c); }
inline Tensor operator-(const Tensor& a) { return ops::scale(a, -1.0); }

}  // namespace mebm
