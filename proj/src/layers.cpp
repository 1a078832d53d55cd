#include "jiq/layers.hpp"

#include <cmath>

#include "jiq/error.hpp"
#include "jiq/rng.hpp"

namespace jiq {

namespace {

template <typename T>
std::vector<T> he_uniform(std::size_t count, double fan_in, std::uint64_t seed, const std::string& name) {
  const double gain = std::sqrt(2.0 / (1.0 + kLeakySlope * kLeakySlope));
  const double bound = gain * std::sqrt(3.0 / fan_in);
  Rng rng(derive_seed(seed, name));
  std::vector<T> v(count);
  for (auto& e : v) e = static_cast<T>(rng.uniform(-bound, bound));
  return v;
}

}  // namespace

template <typename T>
void add_conv_params(ParamStore<T>& store, const std::string& prefix, int out, int in, int kh, int kw,
                     std::uint64_t seed, Init init, bool with_bias) {
  const std::string wname = prefix + ".weight";
  const std::size_t count = static_cast<std::size_t>(out) * in * kh * kw;
  std::vector<T> w;
  switch (init) {
    case Init::kHeUniform:
      w = he_uniform<T>(count, static_cast<double>(in) * kh * kw, seed, wname);
      break;
    case Init::kZero:
      w.assign(count, T(0));
      break;
    case Init::kIdentity:
      if (out != in || kh != 1 || kw != 1) throw ShapeError(prefix + ": identity init needs a square 1x1 kernel");
      w.assign(count, T(0));
      for (int i = 0; i < out; ++i) w[static_cast<std::size_t>(i) * in + i] = T(1);
      break;
  }
  store.add(wname, {out, in, kh, kw}, std::move(w));
  if (with_bias) store.add(prefix + ".bias", {out}, std::vector<T>(static_cast<std::size_t>(out), T(0)));
}

template <typename T>
void add_tconv_params(ParamStore<T>& store, const std::string& prefix, int in, int out, int k, int stride,
                      std::uint64_t seed) {
  const std::string wname = prefix + ".weight";
  const std::size_t count = static_cast<std::size_t>(in) * out * k * k;
  const double fan_in = static_cast<double>(in) * k * k / (stride * stride);
  store.add(wname, {in, out, k, k}, he_uniform<T>(count, fan_in, seed, wname));
  store.add(prefix + ".bias", {out}, std::vector<T>(static_cast<std::size_t>(out), T(0)));
}

template <typename T>
ConvLayer<T> ConvLayer<T>::bind(const ParamStore<T>& store, const std::string& prefix) {
  ConvLayer l;
  l.weight = store.get(prefix + ".weight");
  if (store.contains(prefix + ".bias")) l.bias = store.get(prefix + ".bias");
  return l;
}

template <typename T>
TConvLayer<T> TConvLayer<T>::bind(const ParamStore<T>& store, const std::string& prefix) {
  return {store.get(prefix + ".weight"), store.get(prefix + ".bias")};
}

#define JIQ_INSTANTIATE(T)                                                                          \
  template void add_conv_params<T>(ParamStore<T>&, const std::string&, int, int, int, int,           \
                                   std::uint64_t, Init, bool);                                        \
  template void add_tconv_params<T>(ParamStore<T>&, const std::string&, int, int, int, int,          \
                                    std::uint64_t);                                                   \
  template struct ConvLayer<T>;                                                                      \
  template struct TConvLayer<T>;

JIQ_INSTANTIATE(float)
JIQ_INSTANTIATE(double)

}  // namespace jiq
