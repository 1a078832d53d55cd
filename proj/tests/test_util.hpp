#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "jiq/checkpoint.hpp"
#include "jiq/grad_check.hpp"
#include "jiq/image.hpp"
#include "jiq/ops.hpp"
#include "jiq/rng.hpp"
#include "jiq/tensor.hpp"

namespace jiq::testing {

inline std::vector<double> random_values(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline Tensor<double> random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  auto v = random_values(numel(s), rng, lo, hi);
  return Tensor<double>::constant(std::move(s), std::move(v));
}

inline ImageTensor random_image(int w, int h, Rng& rng) {
  ImageTensor img(w, h);
  for (auto& v : img.values) v = static_cast<float>(static_cast<int>(rng.below(256)) / 127.5 - 1.0);
  return img;
}

/// Scalar projection of t onto seeded random weights.
inline Tensor<double> weighted_sum(const Tensor<double>& t, std::uint64_t seed) {
  Rng rng(seed);
  return sum(mul(t, random_tensor(t.shape(), rng)));
}

/// Every tensor of a store as grad-check inputs.
inline std::vector<NamedTensor> store_params(const ParamStore<double>& store) {
  std::vector<NamedTensor> out;
  for (const auto& [name, t] : store.items()) out.emplace_back(name, t);
  return out;
}

inline void zero_all(ParamStore<double>& store) {
  for (auto& t : store.tensors()) {
    auto v = t.mutable_values();
    std::fill(v.begin(), v.end(), 0.0);
  }
}

/// Overwrites every parameter with U(-scale, scale) noise.
inline void randomize(ParamStore<double>& store, Rng& rng, double scale) {
  for (auto& t : store.tensors()) {
    for (auto& v : t.mutable_values()) v = rng.uniform(-scale, scale);
  }
}

inline double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace jiq::testing
