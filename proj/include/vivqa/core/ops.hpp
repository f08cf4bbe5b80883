#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vivqa/core/rng.hpp"
#include "vivqa/core/tensor.hpp"

namespace vivqa::ops {

enum class BinaryOp { add, sub, mul };

/// [m x k] * [k x n] -> [m x n].
Tensor matmul(const Tensor& a, const Tensor& b);

/// Element-wise op on identically shaped tensors.
Tensor map_binary(const Tensor& a, const Tensor& b, BinaryOp op);
inline Tensor add(const Tensor& a, const Tensor& b) { return map_binary(a, b, BinaryOp::add); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return map_binary(a, b, BinaryOp::sub); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return map_binary(a, b, BinaryOp::mul); }

/// Adds bias[n] to every row of x[... x n]. The only broadcast supported.
Tensor add_row_bias(const Tensor& x, const Tensor& bias);

/// x[m x k] * w[k x n] + b[n].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor scale(const Tensor& x, double factor);
/// Sum of all elements as a [1] tensor.
Tensor sum(const Tensor& x);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
/// Half-open range [begin, end) along one axis.
Tensor slice(const Tensor& t, std::size_t axis, std::size_t begin, std::size_t end);

Tensor permute(const Tensor& t, const std::vector<std::size_t>& axes);
Tensor transpose(const Tensor& t);  // rank 2 only
Tensor reshape(const Tensor& t, Shape shape);
/// Collapses every axis except keep_axis (row-major) into [d_keep x rest].
Tensor flatten(const Tensor& t, std::size_t keep_axis);

/// Input index window [floor(i*n/m), ceil((i+1)*n/m)) for output bin i.
struct PoolWindow {
    std::size_t begin;
    std::size_t end;
};
PoolWindow pool_window(std::size_t out_index, std::size_t in_size, std::size_t out_size);

/// Averages over the trailing axes to the requested sizes. Windows follow
/// pool_window() and overlap when upsampling (out > in).
Tensor adaptive_avg_pool(const Tensor& t, const std::vector<std::size_t>& target_sizes);

Tensor softmax(const Tensor& t, std::size_t axis);
/// Exact x * Phi(x).
Tensor gelu(const Tensor& t);
Tensor tanh(const Tensor& t);

/// Normalizes over the last axis, then scales by gamma and shifts by beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> ids);

/// -log softmax(logits)[target] over all elements of logits.
Tensor cross_entropy(const Tensor& logits, std::size_t target);

/// Stochastic depth for one sample's residual branch. Identity (same
/// handle, no draw) when rate == 0 or not training.
Tensor drop_path(const Tensor& x, double rate, bool training, RngStream& rng);

/// Sets scores[:, j] to -inf wherever key_mask[j] is false.
Tensor mask_columns(const Tensor& scores, const std::vector<bool>& key_mask);

}  // namespace vivqa::ops
