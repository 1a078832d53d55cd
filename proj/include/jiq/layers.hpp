#pragma once

#include <cstdint>
#include <string>

#include "jiq/checkpoint.hpp"
#include "jiq/ops.hpp"

namespace jiq {

inline constexpr double kLeakySlope = 0.2;

enum class Init {
  kHeUniform,  // U(-b, b) with b = gain * sqrt(3 / fan_in), leaky-ReLU gain
  kZero,
  kIdentity,   // 1x1 kernels / square matrices only
};

/// Registers "<prefix>.weight" with shape [out, in, kh, kw] and, when
/// with_bias, a zero "<prefix>.bias" of shape [out]. Values are drawn from a
/// stream keyed by (seed, prefix) so they do not depend on what else exists.
template <typename T>
void add_conv_params(ParamStore<T>& store, const std::string& prefix, int out, int in, int kh, int kw,
                     std::uint64_t seed, Init init = Init::kHeUniform, bool with_bias = true);

/// Transposed-conv weights [in, out, kh, kw] plus bias [out].
template <typename T>
void add_tconv_params(ParamStore<T>& store, const std::string& prefix, int in, int out, int k, int stride,
                      std::uint64_t seed);

template <typename T>
struct ConvLayer {
  Tensor<T> weight;
  Tensor<T> bias;  // may be undefined

  static ConvLayer bind(const ParamStore<T>& store, const std::string& prefix);
  Tensor<T> operator()(const Tensor<T>& x, int stride = 1) const { return conv2d(x, weight, bias, stride); }
};

template <typename T>
struct TConvLayer {
  Tensor<T> weight;
  Tensor<T> bias;

  static TConvLayer bind(const ParamStore<T>& store, const std::string& prefix);
  Tensor<T> operator()(const Tensor<T>& x, int stride) const {
    return conv_transpose2d(x, weight, bias, stride);
  }
};

template <typename T>
Tensor<T> lrelu(const Tensor<T>& x) {
  return leaky_relu(x, static_cast<T>(kLeakySlope));
}

/// Appends one replicated row/column where the extent is odd.
template <typename T>
Tensor<T> pad_if_odd(const Tensor<T>& x) {
  int bottom = x.dim(1) % 2;
  int right = x.dim(2) % 2;
  return (bottom || right) ? pad_replicate(x, bottom, right) : x;
}

}  // namespace jiq
