#include "jiq/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "jiq/error.hpp"

namespace jiq {

namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<Mat<T>>;
template <typename T>
using MapConstMat = Eigen::Map<const Mat<T>>;
template <typename T>
using StridedMap = Eigen::Map<Mat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using StridedConstMap = Eigen::Map<const Mat<T>, 0, Eigen::OuterStride<>>;

// Upper bound on im2col buffer entries; larger problems are processed in row bands.
constexpr std::size_t kColsBudget = std::size_t{1} << 22;

template <typename T>
std::vector<T>* grad_of(Node<T>& n, std::size_t i) {
  auto& in = n.inputs[i];
  return (in && in->requires_grad) ? &in->grad_buffer() : nullptr;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

void require_rank(const Shape& s, std::size_t rank, const char* op) {
  require(s.size() == rank, std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                                shape_str(s));
}

struct ConvGeom {
  int c, h, w, o, kh, kw, stride, pad_t, pad_l, ho, wo;
  int ckk() const { return c * kh * kw; }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad_t == 0 && pad_l == 0; }
  int band_rows() const {
    std::size_t per_row = static_cast<std::size_t>(ckk()) * static_cast<std::size_t>(wo);
    return static_cast<int>(std::clamp<std::size_t>(kColsBudget / std::max<std::size_t>(per_row, 1), 1,
                                                    static_cast<std::size_t>(ho)));
  }
};

ConvGeom make_geom(int c, int h, int w, int o, int kh, int kw, int stride, Padding padding) {
  require(stride >= 1, "conv: stride must be >= 1");
  ConvGeom g{c, h, w, o, kh, kw, stride, 0, 0, 0, 0};
  if (padding == Padding::kSame) {
    g.ho = (h + stride - 1) / stride;
    g.wo = (w + stride - 1) / stride;
    int pad_h = std::max((g.ho - 1) * stride + kh - h, 0);
    int pad_w = std::max((g.wo - 1) * stride + kw - w, 0);
    g.pad_t = pad_h / 2;
    g.pad_l = pad_w / 2;
  } else {
    require(h >= kh && w >= kw, "conv: valid padding needs input at least kernel size");
    g.ho = (h - kh) / stride + 1;
    g.wo = (w - kw) / stride + 1;
  }
  return g;
}

// cols: [ckk, (oy1-oy0)*wo]
template <typename T>
void im2col(const T* x, const ConvGeom& g, int oy0, int oy1, T* cols) {
  const int n = (oy1 - oy0) * g.wo;
  for (int c = 0; c < g.c; ++c) {
    for (int i = 0; i < g.kh; ++i) {
      for (int j = 0; j < g.kw; ++j) {
        T* row = cols + static_cast<std::size_t>((c * g.kh + i) * g.kw + j) * n;
        for (int oy = oy0; oy < oy1; ++oy) {
          T* dst = row + (oy - oy0) * g.wo;
          int iy = oy * g.stride + i - g.pad_t;
          if (iy < 0 || iy >= g.h) {
            std::fill(dst, dst + g.wo, T(0));
            continue;
          }
          const T* src = x + (static_cast<std::size_t>(c) * g.h + iy) * g.w;
          for (int ox = 0; ox < g.wo; ++ox) {
            int ix = ox * g.stride + j - g.pad_l;
            dst[ox] = (ix >= 0 && ix < g.w) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, const ConvGeom& g, int oy0, int oy1, T* x) {
  const int n = (oy1 - oy0) * g.wo;
  for (int c = 0; c < g.c; ++c) {
    for (int i = 0; i < g.kh; ++i) {
      for (int j = 0; j < g.kw; ++j) {
        const T* row = cols + static_cast<std::size_t>((c * g.kh + i) * g.kw + j) * n;
        for (int oy = oy0; oy < oy1; ++oy) {
          int iy = oy * g.stride + i - g.pad_t;
          if (iy < 0 || iy >= g.h) continue;
          const T* src = row + (oy - oy0) * g.wo;
          T* dst = x + (static_cast<std::size_t>(c) * g.h + iy) * g.w;
          for (int ox = 0; ox < g.wo; ++ox) {
            int ix = ox * g.stride + j - g.pad_l;
            if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

template <typename T>
void add_channel_bias(std::vector<T>& out, const Tensor<T>& bias, int channels, std::size_t plane) {
  if (!bias.defined()) return;
  require(bias.size() == static_cast<std::size_t>(channels), "bias size does not match channels");
  const T* b = bias.data();
  for (int o = 0; o < channels; ++o) {
    T* p = out.data() + o * plane;
    for (std::size_t i = 0; i < plane; ++i) p[i] += b[o];
  }
}

template <typename T>
void bias_backward(std::vector<T>* db, const std::vector<T>& g, int channels, std::size_t plane) {
  if (!db) return;
  for (int o = 0; o < channels; ++o) {
    const T* p = g.data() + o * plane;
    T s = 0;
    for (std::size_t i = 0; i < plane; ++i) s += p[i];
    (*db)[o] += s;
  }
}

template <typename T, typename F, typename G>
Tensor<T> unary(const Tensor<T>& x, F fwd, G deriv, const char* name) {
  std::vector<T> out(x.size());
  const T* in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(in[i]);
  return Tensor<T>::from_op(x.shape(), std::move(out), {x},
                            [deriv](Node<T>& n) {
                              auto* dx = grad_of(n, 0);
                              if (!dx) return;
                              const auto& xin = n.inputs[0]->value;
                              for (std::size_t i = 0; i < n.grad.size(); ++i) {
                                (*dx)[i] += n.grad[i] * deriv(xin[i], n.value[i]);
                              }
                            },
                            name);
}

template <typename T>
void require_same(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                      " vs " + shape_str(b.shape()));
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias, int stride,
                 std::span<const T> mask, Padding padding) {
  require_rank(x.shape(), 3, "conv2d input");
  require_rank(kernel.shape(), 4, "conv2d kernel");
  require(kernel.dim(1) == x.dim(0), "conv2d: kernel expects " + std::to_string(kernel.dim(1)) +
                                         " input channels, got " + std::to_string(x.dim(0)));
  const ConvGeom g = make_geom(x.dim(0), x.dim(1), x.dim(2), kernel.dim(0), kernel.dim(2),
                               kernel.dim(3), stride, padding);
  require(mask.empty() || mask.size() == static_cast<std::size_t>(g.kh * g.kw),
          "conv2d: mask must have kh*kw entries");

  std::vector<T> masked;
  if (!mask.empty()) {
    masked.assign(kernel.values().begin(), kernel.values().end());
    const std::size_t taps = mask.size();
    for (std::size_t i = 0; i < masked.size(); ++i) masked[i] *= mask[i % taps];
  }
  const std::size_t plane = static_cast<std::size_t>(g.ho) * g.wo;
  std::vector<T> out(static_cast<std::size_t>(g.o) * plane);
  {
    MapConstMat<T> k(masked.empty() ? kernel.data() : masked.data(), g.o, g.ckk());
    if (g.pointwise()) {
      MapConstMat<T> xm(x.data(), g.c, g.h * g.w);
      MapMat<T>(out.data(), g.o, g.h * g.w).noalias() = k * xm;
    } else {
      const int band = g.band_rows();
      std::vector<T> cols;
      for (int oy0 = 0; oy0 < g.ho; oy0 += band) {
        int oy1 = std::min(g.ho, oy0 + band);
        int n = (oy1 - oy0) * g.wo;
        cols.resize(static_cast<std::size_t>(g.ckk()) * n);
        im2col(x.data(), g, oy0, oy1, cols.data());
        StridedMap<T> om(out.data() + static_cast<std::size_t>(oy0) * g.wo, g.o, n,
                         Eigen::OuterStride<>(static_cast<Eigen::Index>(plane)));
        om.noalias() = k * MapConstMat<T>(cols.data(), g.ckk(), n);
      }
    }
  }
  add_channel_bias(out, bias, g.o, plane);

  std::vector<T> mask_copy(mask.begin(), mask.end());
  return Tensor<T>::from_op(
      {g.o, g.ho, g.wo}, std::move(out), {x, kernel, bias},
      [g, mask_copy = std::move(mask_copy), masked = std::move(masked), plane](Node<T>& n) {
        auto* dx = grad_of(n, 0);
        auto* dk = grad_of(n, 1);
        bias_backward(grad_of(n, 2), n.grad, g.o, plane);
        if (!dx && !dk) return;
        const T* xv = n.inputs[0]->value.data();
        MapConstMat<T> k(masked.empty() ? n.inputs[1]->value.data() : masked.data(), g.o, g.ckk());
        Mat<T> dk_acc;
        if (dk) dk_acc = Mat<T>::Zero(g.o, g.ckk());
        if (g.pointwise()) {
          MapConstMat<T> gm(n.grad.data(), g.o, g.h * g.w);
          MapConstMat<T> xm(xv, g.c, g.h * g.w);
          if (dk) dk_acc.noalias() += gm * xm.transpose();
          if (dx) MapMat<T>(dx->data(), g.c, g.h * g.w).noalias() += k.transpose() * gm;
        } else {
          const int band = g.band_rows();
          std::vector<T> cols;
          Mat<T> dcols;
          for (int oy0 = 0; oy0 < g.ho; oy0 += band) {
            int oy1 = std::min(g.ho, oy0 + band);
            int cnt = (oy1 - oy0) * g.wo;
            StridedConstMap<T> gm(n.grad.data() + static_cast<std::size_t>(oy0) * g.wo, g.o, cnt,
                                  Eigen::OuterStride<>(static_cast<Eigen::Index>(plane)));
            if (dk) {
              cols.resize(static_cast<std::size_t>(g.ckk()) * cnt);
              im2col(xv, g, oy0, oy1, cols.data());
              dk_acc.noalias() += gm * MapConstMat<T>(cols.data(), g.ckk(), cnt).transpose();
            }
            if (dx) {
              dcols.noalias() = k.transpose() * gm;
              col2im_add(dcols.data(), g, oy0, oy1, dx->data());
            }
          }
        }
        if (dk) {
          const std::size_t taps = static_cast<std::size_t>(g.kh * g.kw);
          const T* src = dk_acc.data();
          for (std::size_t i = 0; i < dk->size(); ++i) {
            T m = mask_copy.empty() ? T(1) : mask_copy[i % taps];
            (*dk)[i] += src[i] * m;
          }
        }
      },
      "conv2d");
}

template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias,
                           int stride) {
  require_rank(x.shape(), 3, "conv_transpose2d input");
  require_rank(kernel.shape(), 4, "conv_transpose2d kernel");
  require(kernel.dim(0) == x.dim(0), "conv_transpose2d: kernel expects " +
                                         std::to_string(kernel.dim(0)) + " input channels, got " +
                                         std::to_string(x.dim(0)));
  const int h = x.dim(1), w = x.dim(2);
  // Geometry of the forward conv whose adjoint this is.
  const ConvGeom g = make_geom(kernel.dim(1), h * stride, w * stride, kernel.dim(0), kernel.dim(2),
                               kernel.dim(3), stride, Padding::kSame);
  const std::size_t in_plane = static_cast<std::size_t>(h) * w;
  const std::size_t out_plane = static_cast<std::size_t>(g.h) * g.w;
  std::vector<T> out(static_cast<std::size_t>(g.c) * out_plane, T(0));
  {
    MapConstMat<T> k(kernel.data(), g.o, g.ckk());
    const int band = g.band_rows();
    Mat<T> cols;
    for (int oy0 = 0; oy0 < h; oy0 += band) {
      int oy1 = std::min(h, oy0 + band);
      int cnt = (oy1 - oy0) * w;
      StridedConstMap<T> xm(x.data() + static_cast<std::size_t>(oy0) * w, g.o, cnt,
                            Eigen::OuterStride<>(static_cast<Eigen::Index>(in_plane)));
      cols.noalias() = k.transpose() * xm;
      col2im_add(cols.data(), g, oy0, oy1, out.data());
    }
  }
  add_channel_bias(out, bias, g.c, out_plane);

  return Tensor<T>::from_op(
      {g.c, g.h, g.w}, std::move(out), {x, kernel, bias},
      [g, in_plane, out_plane](Node<T>& n) {
        auto* dx = grad_of(n, 0);
        auto* dk = grad_of(n, 1);
        bias_backward(grad_of(n, 2), n.grad, g.c, out_plane);
        if (!dx && !dk) return;
        const T* xv = n.inputs[0]->value.data();
        MapConstMat<T> k(n.inputs[1]->value.data(), g.o, g.ckk());
        Mat<T> dk_acc;
        if (dk) dk_acc = Mat<T>::Zero(g.o, g.ckk());
        const int band = g.band_rows();
        std::vector<T> dcols;
        for (int oy0 = 0; oy0 < g.ho; oy0 += band) {
          int oy1 = std::min(g.ho, oy0 + band);
          int cnt = (oy1 - oy0) * g.wo;
          dcols.resize(static_cast<std::size_t>(g.ckk()) * cnt);
          im2col(n.grad.data(), g, oy0, oy1, dcols.data());
          MapConstMat<T> dc(dcols.data(), g.ckk(), cnt);
          if (dx) {
            StridedMap<T> dxm(dx->data() + static_cast<std::size_t>(oy0) * g.wo, g.o, cnt,
                              Eigen::OuterStride<>(static_cast<Eigen::Index>(in_plane)));
            dxm.noalias() += k * dc;
          }
          if (dk) {
            StridedConstMap<T> xm(xv + static_cast<std::size_t>(oy0) * g.wo, g.o, cnt,
                                  Eigen::OuterStride<>(static_cast<Eigen::Index>(in_plane)));
            dk_acc.noalias() += xm * dc.transpose();
          }
        }
        if (dk) {
          const T* src = dk_acc.data();
          for (std::size_t i = 0; i < dk->size(); ++i) (*dk)[i] += src[i];
        }
      },
      "conv_transpose2d");
}

template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& bias) {
  require_rank(x.shape(), 1, "dense input");
  require_rank(weights.shape(), 2, "dense weights");
  const int m = weights.dim(0), nin = weights.dim(1);
  require(nin == x.dim(0), "dense: weights expect " + std::to_string(nin) + " inputs, got " +
                               std::to_string(x.dim(0)));
  std::vector<T> out(static_cast<std::size_t>(m));
  const T* wv = weights.data();
  const T* xv = x.data();
  for (int i = 0; i < m; ++i) {
    T s = bias.defined() ? bias.data()[i] : T(0);
    for (int j = 0; j < nin; ++j) s += wv[static_cast<std::size_t>(i) * nin + j] * xv[j];
    out[static_cast<std::size_t>(i)] = s;
  }
  if (bias.defined()) require(bias.size() == static_cast<std::size_t>(m), "dense: bias size mismatch");
  return Tensor<T>::from_op(
      {m}, std::move(out), {x, weights, bias},
      [m, nin](Node<T>& n) {
        auto* dx = grad_of(n, 0);
        auto* dw = grad_of(n, 1);
        auto* db = grad_of(n, 2);
        const auto& xv = n.inputs[0]->value;
        const auto& wv = n.inputs[1]->value;
        for (int i = 0; i < m; ++i) {
          T gi = n.grad[static_cast<std::size_t>(i)];
          if (db) (*db)[static_cast<std::size_t>(i)] += gi;
          for (int j = 0; j < nin; ++j) {
            std::size_t idx = static_cast<std::size_t>(i) * nin + j;
            if (dw) (*dw)[idx] += gi * xv[static_cast<std::size_t>(j)];
            if (dx) (*dx)[static_cast<std::size_t>(j)] += gi * wv[idx];
          }
        }
      },
      "dense");
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary(
      x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); },
      "relu");
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
  return unary(
      x, [slope](T v) { return v > T(0) ? v : slope * v; },
      [slope](T v, T) { return v > T(0) ? T(1) : slope; }, "leaky_relu");
}

template <typename T>
Tensor<T> softplus(const Tensor<T>& x) {
  return unary(
      x,
      [](T v) { return v > T(0) ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); },
      [](T v, T) { return T(1) / (T(1) + std::exp(-v)); }, "softplus");
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary(
      x, [](T v) { return T(1) / (T(1) + std::exp(-v)); }, [](T, T y) { return y * (T(1) - y); },
      "sigmoid");
}

template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
  return unary(
      x, [lo, hi](T v) { return std::clamp(v, lo, hi); },
      [lo, hi](T v, T) { return (v >= lo && v <= hi) ? T(1) : T(0); }, "clamp");
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
  return unary(x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; }, "square");
}

template <typename T>
Tensor<T> pow_scalar(const Tensor<T>& x, T p) {
  return unary(
      x, [p](T v) { return v > T(0) ? std::pow(v, p) : T(0); },
      [p](T v, T) { return v > T(0) ? p * std::pow(v, p - T(1)) : T(0); }, "pow_scalar");
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T s) {
  return unary(x, [s](T v) { return v * s; }, [s](T, T) { return s; }, "scale");
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T s) {
  return unary(x, [s](T v) { return v + s; }, [](T, T) { return T(1); }, "add_scalar");
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
  require(axis >= 0 && axis < x.rank(), "softmax: axis out of range");
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= static_cast<std::size_t>(x.dim(i));
  for (int i = axis + 1; i < x.rank(); ++i) inner *= static_cast<std::size_t>(x.dim(i));
  const std::size_t len = static_cast<std::size_t>(x.dim(axis));
  std::vector<T> out(x.size());
  const T* in = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * len * inner + i;
      T mx = in[base];
      for (std::size_t k = 1; k < len; ++k) mx = std::max(mx, in[base + k * inner]);
      T s = 0;
      for (std::size_t k = 0; k < len; ++k) {
        T e = std::exp(in[base + k * inner] - mx);
        out[base + k * inner] = e;
        s += e;
      }
      for (std::size_t k = 0; k < len; ++k) out[base + k * inner] /= s;
    }
  }
  return Tensor<T>::from_op(
      x.shape(), std::move(out), {x},
      [outer, inner, len](Node<T>& n) {
        auto* dx = grad_of(n, 0);
        if (!dx) return;
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t i = 0; i < inner; ++i) {
            const std::size_t base = o * len * inner + i;
            T dot = 0;
            for (std::size_t k = 0; k < len; ++k) dot += n.grad[base + k * inner] * n.value[base + k * inner];
            for (std::size_t k = 0; k < len; ++k) {
              std::size_t idx = base + k * inner;
              (*dx)[idx] += n.value[idx] * (n.grad[idx] - dot);
            }
          }
        }
      },
      "softmax");
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same(a, b, "add");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return Tensor<T>::from_op(
      a.shape(), std::move(out), {a, b},
      [](Node<T>& n) {
        for (std::size_t k = 0; k < 2; ++k) {
          if (auto* d = grad_of(n, k)) {
            for (std::size_t i = 0; i < n.grad.size(); ++i) (*d)[i] += n.grad[i];
          }
        }
      },
      "add");
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same(a, b, "sub");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return Tensor<T>::from_op(
      a.shape(), std::move(out), {a, b},
      [](Node<T>& n) {
        if (auto* d = grad_of(n, 0)) {
          for (std::size_t i = 0; i < n.grad.size(); ++i) (*d)[i] += n.grad[i];
        }
        if (auto* d = grad_of(n, 1)) {
          for (std::size_t i = 0; i < n.grad.size(); ++i) (*d)[i] -= n.grad[i];
        }
      },
      "sub");
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same(a, b, "mul");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return Tensor<T>::from_op(
      a.shape(), std::move(out), {a, b},
      [](Node<T>& n) {
        const auto& av = n.inputs[0]->value;
        const auto& bv = n.inputs[1]->value;
        if (auto* d = grad_of(n, 0)) {
          for (std::size_t i = 0; i < n.grad.size(); ++i) (*d)[i] += n.grad[i] * bv[i];
        }
        if (auto* d = grad_of(n, 1)) {
          for (std::size_t i = 0; i < n.grad.size(); ++i) (*d)[i] += n.grad[i] * av[i];
        }
      },
      "mul");
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  require_same(a, b, "div");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] / b.data()[i];
  return Tensor<T>::from_op(
      a.shape(), std::move(out), {a, b},
      [](Node<T>& n) {
        const auto& bv = n.inputs[1]->value;
        if (auto* d = grad_of(n, 0)) {
          for (std::size_t i = 0; i < n.grad.size(); ++i) (*d)[i] += n.grad[i] / bv[i];
        }
        if (auto* d = grad_of(n, 1)) {
          for (std::size_t i = 0; i < n.grad.size(); ++i) (*d)[i] -= n.grad[i] * n.value[i] / bv[i];
        }
      },
      "div");
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T s = 0;
  for (T v : x.values()) s += v;
  return Tensor<T>::from_op(
      {1}, {s}, {x},
      [](Node<T>& n) {
        if (auto* d = grad_of(n, 0)) {
          for (auto& v : *d) v += n.grad[0];
        }
      },
      "sum");
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  require(x.size() > 0, "mean of empty tensor");
  return scale(sum(x), T(1) / static_cast<T>(x.size()));
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  require(numel(shape) == x.size(), "reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  std::vector<T> out(x.values().begin(), x.values().end());
  return Tensor<T>::from_op(
      std::move(shape), std::move(out), {x},
      [](Node<T>& n) {
        if (auto* d = grad_of(n, 0)) {
          for (std::size_t i = 0; i < n.grad.size(); ++i) (*d)[i] += n.grad[i];
        }
      },
      "reshape");
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts) {
  require(!parts.empty(), "concat of nothing");
  Shape tail(parts[0].shape().begin() + 1, parts[0].shape().end());
  int lead = 0;
  std::vector<T> out;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    require(p.rank() >= 1 && Shape(p.shape().begin() + 1, p.shape().end()) == tail,
            "concat: trailing extents differ");
    offsets.push_back(out.size());
    lead += p.dim(0);
    out.insert(out.end(), p.values().begin(), p.values().end());
  }
  Shape shape{lead};
  shape.insert(shape.end(), tail.begin(), tail.end());
  return Tensor<T>::from_op(
      std::move(shape), std::move(out), parts,
      [offsets](Node<T>& n) {
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          if (auto* d = grad_of(n, k)) {
            const T* src = n.grad.data() + offsets[k];
            for (std::size_t i = 0; i < d->size(); ++i) (*d)[i] += src[i];
          }
        }
      },
      "concat");
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, int begin, int end) {
  require(x.rank() >= 1 && 0 <= begin && begin <= end && end <= x.dim(0), "slice: bad range");
  const std::size_t row = x.size() / static_cast<std::size_t>(x.dim(0));
  std::vector<T> out(x.values().begin() + static_cast<std::ptrdiff_t>(begin * row),
                     x.values().begin() + static_cast<std::ptrdiff_t>(end * row));
  Shape shape = x.shape();
  shape[0] = end - begin;
  const std::size_t off = static_cast<std::size_t>(begin) * row;
  return Tensor<T>::from_op(
      std::move(shape), std::move(out), {x},
      [off](Node<T>& n) {
        if (auto* d = grad_of(n, 0)) {
          for (std::size_t i = 0; i < n.grad.size(); ++i) (*d)[off + i] += n.grad[i];
        }
      },
      "slice");
}

template <typename T>
Tensor<T> gather(const Tensor<T>& x, std::span<const int> indices) {
  require(x.rank() >= 1, "gather: rank 0");
  const std::size_t row = x.size() / static_cast<std::size_t>(x.dim(0));
  std::vector<T> out;
  out.reserve(indices.size() * row);
  for (int idx : indices) {
    require(idx >= 0 && idx < x.dim(0), "gather: index out of range");
    auto b = x.values().begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(idx) * row);
    out.insert(out.end(), b, b + static_cast<std::ptrdiff_t>(row));
  }
  Shape shape = x.shape();
  shape[0] = static_cast<int>(indices.size());
  std::vector<int> idx_copy(indices.begin(), indices.end());
  return Tensor<T>::from_op(
      std::move(shape), std::move(out), {x},
      [row, idx_copy = std::move(idx_copy)](Node<T>& n) {
        if (auto* d = grad_of(n, 0)) {
          for (std::size_t k = 0; k < idx_copy.size(); ++k) {
            T* dst = d->data() + static_cast<std::size_t>(idx_copy[k]) * row;
            const T* src = n.grad.data() + k * row;
            for (std::size_t i = 0; i < row; ++i) dst[i] += src[i];
          }
        }
      },
      "gather");
}

template <typename T>
Tensor<T> pad_replicate(const Tensor<T>& x, int bottom, int right) {
  require_rank(x.shape(), 3, "pad_replicate");
  require(bottom >= 0 && right >= 0, "pad_replicate: negative pad");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int ho = h + bottom, wo = w + right;
  std::vector<T> out(static_cast<std::size_t>(c) * ho * wo);
  const T* in = x.data();
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < ho; ++y) {
      int sy = std::min(y, h - 1);
      for (int xx = 0; xx < wo; ++xx) {
        int sx = std::min(xx, w - 1);
        out[(static_cast<std::size_t>(ch) * ho + y) * wo + xx] = in[(static_cast<std::size_t>(ch) * h + sy) * w + sx];
      }
    }
  }
  return Tensor<T>::from_op(
      {c, ho, wo}, std::move(out), {x},
      [c, h, w, ho, wo](Node<T>& n) {
        auto* d = grad_of(n, 0);
        if (!d) return;
        for (int ch = 0; ch < c; ++ch) {
          for (int y = 0; y < ho; ++y) {
            int sy = std::min(y, h - 1);
            for (int xx = 0; xx < wo; ++xx) {
              int sx = std::min(xx, w - 1);
              (*d)[(static_cast<std::size_t>(ch) * h + sy) * w + sx] += n.grad[(static_cast<std::size_t>(ch) * ho + y) * wo + xx];
            }
          }
        }
      },
      "pad_replicate");
}

template <typename T>
Tensor<T> crop(const Tensor<T>& x, int top, int left, int h, int w) {
  require_rank(x.shape(), 3, "crop");
  const int c = x.dim(0), hi = x.dim(1), wi = x.dim(2);
  require(top >= 0 && left >= 0 && h >= 0 && w >= 0 && top + h <= hi && left + w <= wi,
          "crop: window [" + std::to_string(top) + "+" + std::to_string(h) + ", " + std::to_string(left) +
              "+" + std::to_string(w) + "] outside " + shape_str(x.shape()));
  std::vector<T> out(static_cast<std::size_t>(c) * h * w);
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < h; ++y) {
      const T* src = x.data() + (static_cast<std::size_t>(ch) * hi + top + y) * wi + left;
      std::copy(src, src + w, out.begin() + static_cast<std::ptrdiff_t>((static_cast<std::size_t>(ch) * h + y) * w));
    }
  }
  return Tensor<T>::from_op(
      {c, h, w}, std::move(out), {x},
      [c, h, w, hi, wi, top, left](Node<T>& n) {
        auto* d = grad_of(n, 0);
        if (!d) return;
        for (int ch = 0; ch < c; ++ch) {
          for (int y = 0; y < h; ++y) {
            T* dst = d->data() + (static_cast<std::size_t>(ch) * hi + top + y) * wi + left;
            const T* src = n.grad.data() + (static_cast<std::size_t>(ch) * h + y) * w;
            for (int xx = 0; xx < w; ++xx) dst[xx] += src[xx];
          }
        }
      },
      "crop");
}

template <typename T>
Tensor<T> avg_pool2(const Tensor<T>& x) {
  require_rank(x.shape(), 3, "avg_pool2");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int ho = h / 2, wo = w / 2;
  require(ho >= 1 && wo >= 1, "avg_pool2: input too small");
  std::vector<T> out(static_cast<std::size_t>(c) * ho * wo);
  const T* in = x.data();
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < ho; ++y) {
      for (int xx = 0; xx < wo; ++xx) {
        const T* p = in + (static_cast<std::size_t>(ch) * h + 2 * y) * w + 2 * xx;
        out[(static_cast<std::size_t>(ch) * ho + y) * wo + xx] = (p[0] + p[1] + p[w] + p[w + 1]) * T(0.25);
      }
    }
  }
  return Tensor<T>::from_op(
      {c, ho, wo}, std::move(out), {x},
      [c, h, w, ho, wo](Node<T>& n) {
        auto* d = grad_of(n, 0);
        if (!d) return;
        for (int ch = 0; ch < c; ++ch) {
          for (int y = 0; y < ho; ++y) {
            for (int xx = 0; xx < wo; ++xx) {
              T g = n.grad[(static_cast<std::size_t>(ch) * ho + y) * wo + xx] * T(0.25);
              T* p = d->data() + (static_cast<std::size_t>(ch) * h + 2 * y) * w + 2 * xx;
              p[0] += g;
              p[1] += g;
              p[w] += g;
              p[w + 1] += g;
            }
          }
        }
      },
      "avg_pool2");
}

template <typename T>
Tensor<T> broadcast_channels(const Tensor<T>& v, int h, int w) {
  require_rank(v.shape(), 1, "broadcast_channels");
  const int c = v.dim(0);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::vector<T> out(static_cast<std::size_t>(c) * plane);
  for (int ch = 0; ch < c; ++ch) {
    std::fill(out.begin() + static_cast<std::ptrdiff_t>(ch * plane),
              out.begin() + static_cast<std::ptrdiff_t>((ch + 1) * plane), v.data()[ch]);
  }
  return Tensor<T>::from_op(
      {c, h, w}, std::move(out), {v},
      [c, plane](Node<T>& n) {
        auto* d = grad_of(n, 0);
        if (!d) return;
        for (int ch = 0; ch < c; ++ch) {
          T s = 0;
          for (std::size_t i = 0; i < plane; ++i) s += n.grad[ch * plane + i];
          (*d)[static_cast<std::size_t>(ch)] += s;
        }
      },
      "broadcast_channels");
}

#define JIQ_INSTANTIATE_OPS(T)                                                                         \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int,                 \
                            std::span<const T>, Padding);                                              \
  template Tensor<T> conv_transpose2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int);     \
  template Tensor<T> dense(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> relu(const Tensor<T>&);                                                           \
  template Tensor<T> leaky_relu(const Tensor<T>&, T);                                                  \
  template Tensor<T> softplus(const Tensor<T>&);                                                       \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                        \
  template Tensor<T> softmax(const Tensor<T>&, int);                                                   \
  template Tensor<T> clamp(const Tensor<T>&, T, T);                                                    \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> div(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> scale(const Tensor<T>&, T);                                                       \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                                  \
  template Tensor<T> square(const Tensor<T>&);                                                         \
  template Tensor<T> pow_scalar(const Tensor<T>&, T);                                                  \
  template Tensor<T> sum(const Tensor<T>&);                                                            \
  template Tensor<T> mean(const Tensor<T>&);                                                           \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                                 \
  template Tensor<T> concat(const std::vector<Tensor<T>>&);                                            \
  template Tensor<T> slice(const Tensor<T>&, int, int);                                                \
  template Tensor<T> gather(const Tensor<T>&, std::span<const int>);                                   \
  template Tensor<T> pad_replicate(const Tensor<T>&, int, int);                                        \
  template Tensor<T> crop(const Tensor<T>&, int, int, int, int);                                       \
  template Tensor<T> avg_pool2(const Tensor<T>&);                                                      \
  template Tensor<T> broadcast_channels(const Tensor<T>&, int, int);

JIQ_INSTANTIATE_OPS(float)
JIQ_INSTANTIATE_OPS(double)

}  // namespace jiq
