#include "jiq/transforms.hpp"

#include <cmath>
#include <string>

#include "jiq/error.hpp"
#include "jiq/ops.hpp"

namespace jiq {

int PaddingRecord::width_at(int s) const {
  if (s < 0 || s > num_scales()) throw ShapeError("scale " + std::to_string(s) + " out of range");
  int w = width;
  for (int i = 0; i < s; ++i) w = (w + (pad_w[i] ? 1 : 0)) / 2;
  return w;
}

int PaddingRecord::height_at(int s) const {
  if (s < 0 || s > num_scales()) throw ShapeError("scale " + std::to_string(s) + " out of range");
  int h = height;
  for (int i = 0; i < s; ++i) h = (h + (pad_h[i] ? 1 : 0)) / 2;
  return h;
}

PaddingRecord make_padding_record(int width, int height, int num_scales) {
  if (width < 1 || height < 1) throw ShapeError("image extents must be >= 1");
  if (num_scales < 0) throw ShapeError("num_scales must be >= 0");
  PaddingRecord r{width, height, {}, {}};
  int w = width;
  int h = height;
  for (int s = 0; s < num_scales; ++s) {
    r.pad_w.push_back(w % 2 == 1);
    r.pad_h.push_back(h % 2 == 1);
    w = (w + w % 2) / 2;
    h = (h + h % 2) / 2;
  }
  return r;
}

std::pair<ImageTensor, PaddingRecord> pad_for_scales(const ImageTensor& img, int num_scales) {
  PaddingRecord rec = make_padding_record(img.width, img.height, num_scales);
  if (num_scales == 0) return {img, rec};
  const int pw = rec.padded_width_at(0);
  const int ph = rec.padded_height_at(0);
  ImageTensor out(pw, ph);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < ph; ++y) {
      const int sy = std::min(y, img.height - 1);
      for (int x = 0; x < pw; ++x) out.at(c, y, x) = img.at(c, sy, std::min(x, img.width - 1));
    }
  }
  return {std::move(out), std::move(rec)};
}

ImageTensor unpad(const ImageTensor& img, const PaddingRecord& record) {
  const int ew = record.num_scales() > 0 ? record.padded_width_at(0) : record.width;
  const int eh = record.num_scales() > 0 ? record.padded_height_at(0) : record.height;
  if (img.width != ew || img.height != eh) {
    throw ShapeError("unpad: image is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                     ", record expects " + std::to_string(ew) + "x" + std::to_string(eh));
  }
  ImageTensor out(record.width, record.height);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < record.height; ++y) {
      for (int x = 0; x < record.width; ++x) out.at(c, y, x) = img.at(c, y, x);
    }
  }
  return out;
}

template <typename T>
Tensor<T> image_to_tensor(const ImageTensor& img) {
  std::vector<T> v(img.values.begin(), img.values.end());
  return Tensor<T>::constant({3, img.height, img.width}, std::move(v));
}

template <typename T>
ImageTensor tensor_to_image(const Tensor<T>& t) {
  if (t.rank() != 3 || t.dim(0) != 3) throw ShapeError("expected [3,H,W], got " + shape_str(t.shape()));
  ImageTensor img(t.dim(2), t.dim(1));
  for (std::size_t i = 0; i < t.size(); ++i) img.values[i] = static_cast<float>(t.values()[i]);
  return img;
}

template <typename T>
void add_transform_params(ParamStore<T>& store, const ModelConfig& cfg, std::uint64_t seed) {
  const int n = cfg.n;
  const int m = cfg.m;
  const int ga_ch[5] = {3, n, n, n, m};
  for (int i = 0; i < 4; ++i) {
    add_conv_params(store, "ga.conv" + std::to_string(i), ga_ch[i + 1], ga_ch[i], 5, 5, seed);
  }
  const int gs_ch[5] = {m, n, n, n, 3};
  for (int i = 0; i < 4; ++i) {
    add_tconv_params(store, "gs.tconv" + std::to_string(i), gs_ch[i], gs_ch[i + 1], 5, 2, seed);
  }
  add_conv_params(store, "ha.conv0", n, m, 3, 3, seed);
  add_conv_params(store, "ha.conv1", n, n, 5, 5, seed);
  add_conv_params(store, "ha.conv2", n, n, 5, 5, seed);
  add_tconv_params(store, "hs.tconv0", n, n, 5, 2, seed);
  add_tconv_params(store, "hs.tconv1", n, n, 5, 2, seed);
  add_conv_params(store, "hs.conv2", 2 * m, n, 3, 3, seed);
}

template <typename T>
Transforms<T>::Transforms(const ParamStore<T>& store, const ModelConfig& cfg) : n_(cfg.n), m_(cfg.m) {
  for (int i = 0; i < 4; ++i) {
    ga_.push_back(ConvLayer<T>::bind(store, "ga.conv" + std::to_string(i)));
    gs_.push_back(TConvLayer<T>::bind(store, "gs.tconv" + std::to_string(i)));
  }
  for (int i = 0; i < 3; ++i) ha_.push_back(ConvLayer<T>::bind(store, "ha.conv" + std::to_string(i)));
  hs_up_.push_back(TConvLayer<T>::bind(store, "hs.tconv0"));
  hs_up_.push_back(TConvLayer<T>::bind(store, "hs.tconv1"));
  hs_out_ = ConvLayer<T>::bind(store, "hs.conv2");
}

template <typename T>
Tensor<T> Transforms<T>::analysis(const Tensor<T>& x) const {
  if (x.rank() != 3 || x.dim(0) != 3) throw ShapeError("g_a expects [3,H,W], got " + shape_str(x.shape()));
  if (x.dim(1) % 2 || x.dim(2) % 2) {
    throw ShapeError("g_a input " + shape_str(x.shape()) + " is not padded (odd extent)");
  }
  Tensor<T> h = x;
  for (int i = 0; i < 4; ++i) {
    h = ga_[i](pad_if_odd(h), 2);
    if (i < 3) h = lrelu(h);
  }
  return h;
}

template <typename T>
Tensor<T> Transforms<T>::synthesis(const Tensor<T>& y, const PaddingRecord& record) const {
  if (y.rank() != 3 || y.dim(0) != m_) {
    throw ShapeError("g_s expects [" + std::to_string(m_) + ",H,W], got " + shape_str(y.shape()));
  }
  if (record.num_scales() < kImageScales || y.dim(1) != record.height_at(kImageScales) ||
      y.dim(2) != record.width_at(kImageScales)) {
    throw ShapeError("g_s input " + shape_str(y.shape()) + " does not match the padding record");
  }
  Tensor<T> h = y;
  for (int i = 0; i < 4; ++i) {
    const int s = kImageScales - 1 - i;
    h = gs_[i](h, 2);
    if (s > 0) h = lrelu(crop(h, 0, 0, record.height_at(s), record.width_at(s)));
  }
  return clamp(h, T(-1), T(1));
}

template <typename T>
Tensor<T> Transforms<T>::hyper_analysis(const Tensor<T>& y) const {
  if (y.rank() != 3 || y.dim(0) != m_) {
    throw ShapeError("h_a expects [" + std::to_string(m_) + ",H,W], got " + shape_str(y.shape()));
  }
  Tensor<T> h = lrelu(ha_[0](y, 1));
  h = lrelu(ha_[1](pad_if_odd(h), 2));
  return ha_[2](pad_if_odd(h), 2);
}

template <typename T>
Tensor<T> Transforms<T>::hyper_synthesis(const Tensor<T>& z, int hy, int wy) const {
  PaddingRecord rec = make_padding_record(wy, hy, kHyperScales);
  if (z.rank() != 3 || z.dim(0) != n_ || z.dim(1) != rec.height_at(2) || z.dim(2) != rec.width_at(2)) {
    throw ShapeError("h_s input " + shape_str(z.shape()) + " does not match latent extents " +
                     std::to_string(hy) + "x" + std::to_string(wy));
  }
  Tensor<T> h = lrelu(crop(hs_up_[0](z, 2), 0, 0, rec.height_at(1), rec.width_at(1)));
  h = lrelu(crop(hs_up_[1](h, 2), 0, 0, hy, wy));
  return hs_out_(h, 1);
}

LatentGrid::LatentGrid(int c, int h, int w)
    : channels(c), height(h), width(w), values(static_cast<std::size_t>(c) * h * w, 0) {}

template <typename T>
Tensor<T> LatentGrid::to_tensor() const {
  std::vector<T> v(values.begin(), values.end());
  return Tensor<T>::constant({channels, height, width}, std::move(v));
}

std::int32_t quantize_value(double v) {
  if (!std::isfinite(v)) throw NumericError("quantize: non-finite latent value");
  double r = std::round(v);  // halfway cases away from zero
  if (r > kLatentClamp) r = kLatentClamp;
  if (r < -kLatentClamp) r = -kLatentClamp;
  return static_cast<std::int32_t>(r);
}

template <typename T>
LatentGrid quantize_round(const Tensor<T>& v) {
  if (v.rank() != 3) throw ShapeError("latent tensor must be [C,H,W], got " + shape_str(v.shape()));
  LatentGrid g(v.dim(0), v.dim(1), v.dim(2));
  for (std::size_t i = 0; i < v.size(); ++i) g.values[i] = quantize_value(static_cast<double>(v.values()[i]));
  return g;
}

template <typename T>
Tensor<T> quantize(const Tensor<T>& v, QuantMode mode, Rng* rng) {
  if (mode == QuantMode::kRound) {
    std::vector<T> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      out[i] = static_cast<T>(quantize_value(static_cast<double>(v.values()[i])));
    }
    return Tensor<T>::constant(v.shape(), std::move(out));
  }
  if (!rng) throw ConfigError("noise quantization needs a random generator");
  check_finite(v.values(), "quantize");
  std::vector<T> noise(v.size());
  for (auto& u : noise) u = static_cast<T>(rng->uniform() - 0.5);
  return add(v, Tensor<T>::constant(v.shape(), std::move(noise)));
}

#define JIQ_INSTANTIATE(T)                                                                  \
  template Tensor<T> image_to_tensor<T>(const ImageTensor&);                                 \
  template ImageTensor tensor_to_image<T>(const Tensor<T>&);                                 \
  template void add_transform_params<T>(ParamStore<T>&, const ModelConfig&, std::uint64_t);  \
  template class Transforms<T>;                                                              \
  template Tensor<T> LatentGrid::to_tensor<T>() const;                                       \
  template LatentGrid quantize_round<T>(const Tensor<T>&);                                   \
  template Tensor<T> quantize<T>(const Tensor<T>&, QuantMode, Rng*);

JIQ_INSTANTIATE(float)
JIQ_INSTANTIATE(double)

}  // namespace jiq
