#pragma once

#include <span>
#include <vector>

#include "jiq/tensor.hpp"

namespace jiq {

// Feature maps are [C, H, W]. Reductions run in row-major order so forward and
// backward passes are bitwise reproducible on one build.

enum class Padding {
  kSame,   // zero pad so that out = ceil(in / stride)
  kValid,  // no padding
};

/// kernel: [O, C, kh, kw]; bias: [O] or undefined. When `mask` is non-empty it
/// must hold kh*kw entries of 0/1 that are multiplied into every (o, c) slice.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias, int stride = 1,
                 std::span<const T> mask = {}, Padding padding = Padding::kSame);

/// Adjoint of conv2d (same padding) for input extent in*stride.
/// kernel: [C_in, C_out, kh, kw]; output [C_out, H*stride, W*stride].
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias,
                           int stride);

/// x: [n], weights: [m, n], bias: [m] or undefined.
template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& bias);

template <typename T> Tensor<T> relu(const Tensor<T>& x);
template <typename T> Tensor<T> leaky_relu(const Tensor<T>& x, T slope);
template <typename T> Tensor<T> softplus(const Tensor<T>& x);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T> Tensor<T> softmax(const Tensor<T>& x, int axis);
template <typename T> Tensor<T> clamp(const Tensor<T>& x, T lo, T hi);

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& x, T s);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& x, T s);
template <typename T> Tensor<T> square(const Tensor<T>& x);
/// x^p for x > 0; entries <= 0 map to 0 with zero gradient.
template <typename T> Tensor<T> pow_scalar(const Tensor<T>& x, T p);

template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> mean(const Tensor<T>& x);

template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
/// Concatenate along axis 0; trailing extents must agree.
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& parts);
/// Rows [begin, end) along axis 0.
template <typename T> Tensor<T> slice(const Tensor<T>& x, int begin, int end);
/// Selects entries along axis 0 in the given order.
template <typename T> Tensor<T> gather(const Tensor<T>& x, std::span<const int> indices);

/// [C,H,W] -> [C,H+bottom,W+right] replicating the last row/column.
template <typename T> Tensor<T> pad_replicate(const Tensor<T>& x, int bottom, int right);
/// [C,H,W] -> [C,h,w] window starting at (top, left).
template <typename T> Tensor<T> crop(const Tensor<T>& x, int top, int left, int h, int w);
/// 2x2 mean pooling, odd trailing row/column dropped.
template <typename T> Tensor<T> avg_pool2(const Tensor<T>& x);
/// v: [C] -> [C,H,W] with v[c] repeated over each channel plane.
template <typename T> Tensor<T> broadcast_channels(const Tensor<T>& v, int h, int w);

}  // namespace jiq
