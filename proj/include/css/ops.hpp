#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "css/graph.hpp"

namespace css {

enum class Activation { sigmoid, tanh, relu };

Activation parse_activation(std::string_view name);
std::string_view activation_name(Activation a);

// Differentiable operations. Every operand is viewed as a matrix (see Tensor).
// Batched sequence operands are stacked example-major: row b * steps + t.

/// a[m x k] * b[k x n].
template <typename T> Var<T> matmul(Var<T> a, Var<T> b);
template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> sub(Var<T> a, Var<T> b);
/// Elementwise product.
template <typename T> Var<T> mul(Var<T> a, Var<T> b);
template <typename T> Var<T> scale(Var<T> x, T factor);
/// x[m x n] + bias[n], broadcast over rows.
template <typename T> Var<T> add_bias(Var<T> x, Var<T> bias);
/// x * w + bias.
template <typename T> Var<T> affine(Var<T> x, Var<T> w, Var<T> bias);

template <typename T> Var<T> sigmoid(Var<T> x);
template <typename T> Var<T> tanh(Var<T> x);
template <typename T> Var<T> relu(Var<T> x);
template <typename T> Var<T> activate(Var<T> x, Activation kind);

template <typename T> Var<T> sum(Var<T> x);

template <typename T> Var<T> concat_cols(const std::vector<Var<T>>& parts);
template <typename T> Var<T> slice_cols(Var<T> x, std::size_t begin, std::size_t count);
template <typename T> Var<T> slice_rows(Var<T> x, std::size_t begin, std::size_t count);

/// Rows of table[V x E] selected by ids; out-of-range ids throw.
template <typename T> Var<T> embedding(Var<T> table, std::span<const int> ids);

/// Valid 1-D convolution with stride 1 over batch * seq_len stacked rows of
/// width E. filters has shape [W x E x F]; bias has F entries. Output is
/// batch * (seq_len - W + 1) rows of F columns.
template <typename T> Var<T> conv1d_valid(Var<T> x, std::size_t seq_len, Var<T> filters, Var<T> bias);

/// Column-wise max over each block of `steps` rows. Gradient flows to the
/// first maximal row only.
template <typename T> Var<T> max_over_time(Var<T> x, std::size_t steps);

/// Sum of -log softmax(logits[r])[targets[r]] over rows whose target is not
/// `ignore`. Result is a 1x1 scalar.
template <typename T>
Var<T> softmax_cross_entropy(Var<T> logits, std::span<const int> targets, int ignore = -1);

/// Row r becomes mask[r] * a[r] + (1 - mask[r]) * b[r]; mask entries are 0 or 1.
template <typename T> Var<T> blend_rows(std::span<const T> mask, Var<T> a, Var<T> b);

/// x[B x D] -> [B * steps x D], repeating each row `steps` times.
template <typename T> Var<T> repeat_rows(Var<T> x, std::size_t steps);

/// steps tensors of [B x D] -> [B * steps x D].
template <typename T> Var<T> stack_time(const std::vector<Var<T>>& steps);

/// q[B x D] against keys[B * steps x D] -> scores[B x steps].
template <typename T> Var<T> batched_dot(Var<T> q, Var<T> keys, std::size_t steps);

/// Row softmax over the first lengths[b] entries of each row; remaining
/// entries get weight exactly zero.
template <typename T> Var<T> masked_softmax(Var<T> scores, std::span<const int> lengths);

/// weights[B x steps] applied to keys[B * steps x D] -> [B x D].
template <typename T> Var<T> weighted_sum(Var<T> weights, Var<T> keys);

// Non-differentiable helpers.

/// Numerically stable softmax of one row.
template <typename T> std::vector<T> softmax_row(std::span<const T> logits);
/// Numerically stable log-softmax of one row.
template <typename T> std::vector<T> log_softmax_row(std::span<const T> logits);

}  // namespace css
