#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "theta/diff/tensor.hpp"

namespace theta::diff {

// Elementwise binary ops. `b` either matches `a`'s shape or has exactly
// a.last_dim() elements and is broadcast across every row of `a`.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);
// [m,n] -> [n,m]
Tensor transpose(const Tensor& a);

Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor exp(const Tensor& x);
// Gradient passes only where lo < x < hi.
Tensor clamp(const Tensor& x, double lo, double hi);
Tensor scale(const Tensor& x, double s);
Tensor neg(const Tensor& x);

// Normalizes each row over the last axis to zero mean and unit variance.
Tensor layer_norm(const Tensor& x, double eps = 1e-5);
// layer_norm followed by per-feature gain and bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

// Max-subtracted, over the last axis.
Tensor softmax(const Tensor& x);
Tensor log_softmax(const Tensor& x);

Tensor concat(std::span<const Tensor> parts);
Tensor slice(const Tensor& x, std::size_t offset, std::size_t length);
// Rows [begin, begin + count) of a rank-2 tensor.
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Sum of x's flat elements at `indices` (repeats allowed), as a scalar.
Tensor gather_sum(const Tensor& x, std::span<const std::size_t> indices);
// Sum of a list of scalars.
Tensor add_n(std::span<const Tensor> scalars);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

}  // namespace theta::diff
