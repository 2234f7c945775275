#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "aat/tensor.hpp"

// Differentiable operations. Every op records a backward rule when grad mode
// is on and at least one operand requires a gradient.
namespace aat::ops {

// [m x k] . [k x n] -> [m x n]
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// x [N x in], weight [out x in], bias [out] -> x . weight^T + bias
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

// Cross-correlation (no kernel flip). x [N x Cin x H x W], weight
// [Cout x Cin x kh x kw], bias [Cout].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, std::size_t stride = 1,
                 std::size_t pad = 0);

// 2x2 window, stride 2, over the last two axes of an NCHW tensor. Ties go to
// the first position in row-major window order.
template <typename T>
Tensor<T> max_pool2d(const Tensor<T>& x);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

// Sum of all elements -> shape [1].
template <typename T>
Tensor<T> sum(const Tensor<T>& x);

// Sum of squared differences -> shape [1].
template <typename T>
Tensor<T> squared_distance(const Tensor<T>& a, const Tensor<T>& b);

// Concatenation along the last axis; leading extents must agree.
template <typename T>
Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b);

// Splits the last axis into consecutive pieces of the given widths.
template <typename T>
std::vector<Tensor<T>> split(const Tensor<T>& x, std::span<const std::size_t> widths);

// Constant zeros of the same shape. Never requires a gradient.
template <typename T>
Tensor<T> zeros_like(const Tensor<T>& x);

// [N x ...] -> [N x rest]
template <typename T>
Tensor<T> flatten(const Tensor<T>& x);

// Per-feature constant multiplier along the last axis.
template <typename T>
Tensor<T> scale_features(const Tensor<T>& x, std::span<const T> factors);

enum class Reduction { kMean, kSum };

// -log softmax(logits)[label], max-shifted, reduced over the batch.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const int> labels, Reduction reduction = Reduction::kMean);

// Row-wise argmax of a [N x C] tensor; lowest index wins ties.
template <typename T>
std::vector<int> argmax_rows(const Tensor<T>& logits);

}  // namespace aat::ops
