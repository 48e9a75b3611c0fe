#pragma once

// Differentiable tensor operations. Binary elementwise ops require identical
// shapes; the only implicit broadcast is scale() by a host scalar. Bias rows
// are added with the explicit add_bias_rows().

#include <cstdint>
#include <span>
#include <vector>

#include "mtvqa/tensor.hpp"

namespace mtvqa::ops {

/// a[n,k] * b[k,m]
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

/// a[n,k] * b[m,k]^T
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& x, T s);
template <typename T>
Tensor<T> tanh(const Tensor<T>& x);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T>
Tensor<T> relu(const Tensor<T>& x);

/// x[..., m] + b[m] on every row.
template <typename T>
Tensor<T> add_bias_rows(const Tensor<T>& x, const Tensor<T>& b);

/// Softmax over the last axis, with per-row max subtraction.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x);

/// Column-wise max over the time axis: [T,d] -> [d], or [N,T,d] -> [N,d].
/// Gradient goes to the first maximal time index.
template <typename T>
Tensor<T> maxpool_time(const Tensor<T>& x);

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs, std::size_t axis);

/// Same values, new shape with equal element count.
template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

/// Sum of all elements, shape {1}.
template <typename T>
Tensor<T> sum(const Tensor<T>& x);

/// ||a - b||_2 as shape {1}. Gradient at a == b is zero.
template <typename T>
Tensor<T> l2_norm_diff(const Tensor<T>& a, const Tensor<T>& b);

/// Row lookup: table[V,E], ids -> [n,E]. Gradient scatters into the rows.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, std::span<const std::int32_t> ids);

/// One LSTM direction over a batch of equal-length sequences.
///
/// x is [T,in] or [N,T,in]; w_input is [in,4h], w_hidden is [h,4h], bias is
/// [4h] with gate blocks ordered (input, forget, cell, output). Initial hidden
/// and cell states are zero. With reverse=true the sequence is consumed from
/// the last step to the first, and output row t is still aligned with input
/// row t. Output is [T,h] or [N,T,h].
template <typename T>
Tensor<T> lstm(const Tensor<T>& x, const Tensor<T>& w_input, const Tensor<T>& w_hidden,
               const Tensor<T>& bias, bool reverse);

}  // namespace mtvqa::ops
