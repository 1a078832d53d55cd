#include "jiq/entropy_model.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "jiq/error.hpp"
#include "jiq/ops.hpp"

namespace jiq {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double std_normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double softplus(double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); }

void require(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

template <typename T>
std::vector<double> to_double(std::span<const T> v) {
  return std::vector<double>(v.begin(), v.end());
}

template <typename T>
std::vector<T>* grad_of(Node<T>& n, std::size_t i) {
  auto& in = n.inputs[i];
  return (in && in->requires_grad) ? &in->grad_buffer() : nullptr;
}

void check_sigma(double sigma) {
  if (!(sigma >= kSigmaMin * (1.0 - 1e-6))) {
    throw NumericError("scale " + std::to_string(sigma) + " below the minimum " + std::to_string(kSigmaMin));
  }
}

// Per-position quantities of the weighted statistics, shared by forward and backward.
struct WeightedStats {
  std::vector<double> w;
  double mean = 0.0;
  double var = 0.0;
  double sum_w2 = 0.0;
  double denom = 0.0;
  bool clamped = false;
  double stddev = 0.0;
};

WeightedStats weighted_stats(std::span<const double> plane, int width, std::span<const double> psi, int k,
                             int ph, int pw) {
  WeightedStats s;
  s.w = build_weight_field(psi, k, ph, pw, width);
  const std::size_t n = s.w.size();
  for (std::size_t q = 0; q < n; ++q) s.mean += s.w[q] * plane[q];
  for (std::size_t q = 0; q < n; ++q) {
    const double d = plane[q] - s.mean;
    s.var += s.w[q] * d * d;
    s.sum_w2 += s.w[q] * s.w[q];
  }
  s.denom = 1.0 - s.sum_w2;
  if (s.denom < kDenominatorEps) {
    s.denom = kDenominatorEps;
    s.clamped = true;
  }
  s.stddev = std::sqrt(s.var / s.denom);
  return s;
}

}  // namespace

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double gaussian_interval_mass(double lo, double hi, double mu, double sigma) {
  const double a = (lo - mu) / sigma;
  const double b = (hi - mu) / sigma;
  if (a > 0.0) return 0.5 * (std::erfc(a * kInvSqrt2) - std::erfc(b * kInvSqrt2));
  return 0.5 * (std::erfc(-b * kInvSqrt2) - std::erfc(-a * kInvSqrt2));
}

double gmm_likelihood(const GmmParams& p, double v) {
  double total = 0.0;
  for (int g = 0; g < p.components(); ++g) {
    check_sigma(p.sigma[g]);
    total += p.pi[g] * gaussian_interval_mass(v - 0.5, v + 0.5, p.mu[g], p.sigma[g]);
  }
  return total;
}

double gmm_pmf(const GmmParams& p, int n) {
  if (n < kLowTail || n > kHighTail) throw std::out_of_range("symbol value " + std::to_string(n));
  const double inf = std::numeric_limits<double>::infinity();
  const double lo = n == kLowTail ? -inf : n - 0.5;
  const double hi = n == kHighTail ? inf : n + 0.5;
  double total = 0.0;
  for (int g = 0; g < p.components(); ++g) {
    check_sigma(p.sigma[g]);
    total += p.pi[g] * gaussian_interval_mass(lo, hi, p.mu[g], p.sigma[g]);
  }
  return std::max(total, 0.0);
}

std::vector<double> gmm_pmf_table(const GmmParams& p) {
  // One erfc per bin boundary: each boundary keeps its lower and upper tail
  // mass, and a bin is differenced in whichever tail it lies.
  constexpr int kBounds = kAlphabetSize - 1;  // n + 1/2 for n in [kLowTail, kHighTail)
  std::vector<double> t(kAlphabetSize, 0.0);
  std::vector<double> lower(kBounds), upper(kBounds), z(kBounds);
  for (int g = 0; g < p.components(); ++g) {
    check_sigma(p.sigma[g]);
    for (int i = 0; i < kBounds; ++i) {
      z[i] = (kLowTail + i + 0.5 - p.mu[g]) / p.sigma[g];
      const double tail = 0.5 * std::erfc(std::abs(z[i]) * kInvSqrt2);
      lower[i] = z[i] < 0.0 ? tail : 1.0 - tail;
      upper[i] = z[i] < 0.0 ? 1.0 - tail : tail;
    }
    t[0] += p.pi[g] * lower[0];
    for (int s = 1; s < kBounds; ++s) {
      const double m = z[s - 1] > 0.0 ? upper[s - 1] - upper[s] : lower[s] - lower[s - 1];
      t[s] += p.pi[g] * m;
    }
    t[kBounds] += p.pi[g] * upper[kBounds - 1];
  }
  for (auto& v : t) v = std::max(v, 0.0);
  return t;
}

double z_pmf(double sigma, int n) { return gmm_pmf(GmmParams{{1.0}, {0.0}, {sigma}}, n); }

std::vector<double> build_weight_field(std::span<const double> psi, int k, int ph, int pw, int width) {
  const int side = 2 * k + 1;
  require(psi.size() == static_cast<std::size_t>(side) * side, "psi must hold (2k+1)^2 entries");
  require(ph >= 0 && pw >= 0 && pw < width, "position outside the grid");
  const std::size_t count = static_cast<std::size_t>(ph) * width + pw;
  require(count > 0, "empty causal region at (0, 0)");
  std::vector<double> w(count);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t q = 0; q < count; ++q) {
    const int dy = static_cast<int>(q / width) - ph;
    const int dx = static_cast<int>(q % width) - pw;
    w[q] = psi[(clip_offset(dy, k) + k) * side + clip_offset(dx, k) + k];
    top = std::max(top, w[q]);
  }
  double z = 0.0;
  for (auto& v : w) {
    v = std::exp(v - top);
    z += v;
  }
  for (auto& v : w) v /= z;
  return w;
}

GlobalContext global_context_at(std::span<const double> plane, int width, std::span<const double> psi, int k,
                                int ph, int pw, int min_count) {
  const std::int64_t count = static_cast<std::int64_t>(ph) * width + pw;
  if (count < min_count || count == 0) return {};
  auto s = weighted_stats(plane, width, psi, k, ph, pw);
  return {s.mean, s.stddev};
}

template <typename T>
Tensor<T> global_context(const Tensor<T>& ydot, const Tensor<T>& psi, int k, int min_count) {
  require(ydot.rank() == 3, "global_context: ydot must be [M,H,W], got " + shape_str(ydot.shape()));
  const int m = ydot.dim(0), h = ydot.dim(1), w = ydot.dim(2);
  const int side = 2 * k + 1;
  require(psi.shape() == Shape{m, side, side}, "global_context: psi " + shape_str(psi.shape()) +
                                                   " does not match " + std::to_string(m) + " channels, k=" +
                                                   std::to_string(k));
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const std::size_t psi_len = static_cast<std::size_t>(side) * side;
  std::vector<double> y = to_double(ydot.values());
  std::vector<double> ps = to_double(psi.values());
  std::vector<T> out(2 * m * plane, T(0));
  for (int c = 0; c < m; ++c) {
    std::span<const double> yc(y.data() + c * plane, plane);
    std::span<const double> pc(ps.data() + c * psi_len, psi_len);
    for (std::size_t p = 0; p < plane; ++p) {
      auto gc = global_context_at(yc, w, pc, k, static_cast<int>(p / w), static_cast<int>(p % w), min_count);
      out[c * plane + p] = static_cast<T>(gc.mean);
      out[(m + c) * plane + p] = static_cast<T>(gc.stddev);
    }
  }
  return Tensor<T>::from_op(
      {2 * m, h, w}, std::move(out), {ydot, psi},
      [m, w, k, min_count, plane, psi_len, side, y = std::move(y), ps = std::move(ps)](Node<T>& n) {
        auto* dy = grad_of(n, 0);
        auto* dpsi = grad_of(n, 1);
        for (int c = 0; c < m; ++c) {
          std::span<const double> yc(y.data() + c * plane, plane);
          std::span<const double> pc(ps.data() + c * psi_len, psi_len);
          for (std::size_t p = std::max<std::size_t>(min_count, 1); p < plane; ++p) {
            const double g_mean = n.grad[c * plane + p];
            const double g_std = n.grad[(m + c) * plane + p];
            if (g_mean == 0.0 && g_std == 0.0) continue;
            const int ph = static_cast<int>(p / w), pw = static_cast<int>(p % w);
            auto s = weighted_stats(yc, w, pc, k, ph, pw);
            double g_var = 0.0, g_den = 0.0;
            if (s.stddev > 0.0) {
              g_var = g_std / (2.0 * s.stddev * s.denom);
              if (!s.clamped) g_den = -g_std * s.stddev / (2.0 * s.denom);
            }
            const std::size_t count = s.w.size();
            std::vector<double> gw(count);
            double wgw = 0.0;
            for (std::size_t q = 0; q < count; ++q) {
              const double d = yc[q] - s.mean;
              gw[q] = g_mean * yc[q] + g_var * d * d - 2.0 * g_den * s.w[q];
              wgw += s.w[q] * gw[q];
            }
            for (std::size_t q = 0; q < count; ++q) {
              if (dpsi) {
                const int ddy = static_cast<int>(q / w) - ph;
                const int ddx = static_cast<int>(q % w) - pw;
                const std::size_t idx = c * psi_len + (clip_offset(ddy, k) + k) * side + clip_offset(ddx, k) + k;
                (*dpsi)[idx] += static_cast<T>(s.w[q] * (gw[q] - wgw));
              }
              if (dy) {
                const double d = yc[q] - s.mean;
                (*dy)[c * plane + q] += static_cast<T>(g_mean * s.w[q] + g_var * 2.0 * s.w[q] * d);
              }
            }
          }
        }
      },
      "global_context");
}

template <typename T>
Tensor<T> gmm_bits(const Tensor<T>& y, const Tensor<T>& pi, const Tensor<T>& mu, const Tensor<T>& sigma,
                   int g) {
  require(y.rank() == 3 && g >= 1, "gmm_bits: y must be [M,H,W]");
  const Shape ps{y.dim(0) * g, y.dim(1), y.dim(2)};
  require(pi.shape() == ps && mu.shape() == ps && sigma.shape() == ps,
          "gmm_bits: parameter shape must be " + shape_str(ps));
  const std::size_t plane = static_cast<std::size_t>(y.dim(1)) * y.dim(2);
  const int m = y.dim(0);
  for (T s : sigma.values()) check_sigma(static_cast<double>(s));
  double bits = 0.0;
  for (int c = 0; c < m; ++c) {
    for (std::size_t p = 0; p < plane; ++p) {
      const double v = y.values()[c * plane + p];
      double lik = 0.0;
      for (int k = 0; k < g; ++k) {
        const std::size_t i = (static_cast<std::size_t>(c) * g + k) * plane + p;
        lik += static_cast<double>(pi.values()[i]) *
               gaussian_interval_mass(v - 0.5, v + 0.5, mu.values()[i], sigma.values()[i]);
      }
      bits -= std::log2(std::max(lik, kLikelihoodFloor));
    }
  }
  return Tensor<T>::from_op(
      {1}, {static_cast<T>(bits)}, {y, pi, mu, sigma},
      [m, g, plane](Node<T>& n) {
        const double gout = n.grad[0];
        const auto& yv = n.inputs[0]->value;
        const auto& piv = n.inputs[1]->value;
        const auto& muv = n.inputs[2]->value;
        const auto& sv = n.inputs[3]->value;
        auto* dy = grad_of(n, 0);
        auto* dpi = grad_of(n, 1);
        auto* dmu = grad_of(n, 2);
        auto* dsig = grad_of(n, 3);
        std::vector<double> mass(g), pa(g), pb(g), a(g), b(g);
        for (int c = 0; c < m; ++c) {
          for (std::size_t p = 0; p < plane; ++p) {
            const double v = yv[c * plane + p];
            double lik = 0.0;
            for (int k = 0; k < g; ++k) {
              const std::size_t i = (static_cast<std::size_t>(c) * g + k) * plane + p;
              const double s = sv[i];
              a[k] = (v - 0.5 - muv[i]) / s;
              b[k] = (v + 0.5 - muv[i]) / s;
              mass[k] = gaussian_interval_mass(v - 0.5, v + 0.5, muv[i], s);
              pa[k] = std_normal_pdf(a[k]);
              pb[k] = std_normal_pdf(b[k]);
              lik += piv[i] * mass[k];
            }
            if (lik < kLikelihoodFloor) continue;
            const double scale = -gout / (lik * std::numbers::ln2);
            double gy = 0.0;
            for (int k = 0; k < g; ++k) {
              const std::size_t i = (static_cast<std::size_t>(c) * g + k) * plane + p;
              const double s = sv[i];
              if (dpi) (*dpi)[i] += static_cast<T>(scale * mass[k]);
              if (dmu) (*dmu)[i] += static_cast<T>(scale * piv[i] * (pa[k] - pb[k]) / s);
              if (dsig) (*dsig)[i] += static_cast<T>(scale * piv[i] * (a[k] * pa[k] - b[k] * pb[k]) / s);
              gy += piv[i] * (pb[k] - pa[k]) / s;
            }
            if (dy) (*dy)[c * plane + p] += static_cast<T>(scale * gy);
          }
        }
      },
      "gmm_bits");
}

template <typename T>
std::vector<T> causal_mask() {
  std::vector<T> mask(kLocalWindow * kLocalWindow, T(0));
  const int centre = kLocalWindow / 2;
  for (int i = 0; i < kLocalWindow; ++i) {
    for (int j = 0; j < kLocalWindow; ++j) {
      if (i < centre || (i == centre && j < centre)) mask[i * kLocalWindow + j] = T(1);
    }
  }
  return mask;
}

int raw_output_count(const ModelConfig& cfg) { return 3 * cfg.mixtures() * cfg.m; }

template <typename T>
void add_entropy_params(ParamStore<T>& store, const ModelConfig& cfg, std::uint64_t seed) {
  const int m = cfg.m;
  const int f = cfg.f_width();
  const int side = 2 * cfg.k + 1;
  add_conv_params(store, "em.local", 2 * m, m, kLocalWindow, kLocalWindow, seed);
  add_conv_params(store, "em.f.in_hyper", f, 2 * m, 1, 1, seed);
  add_conv_params(store, "em.f.in_local", f, 2 * m, 1, 1, seed, Init::kHeUniform, false);
  if (cfg.flags.global_context) {
    add_conv_params(store, "em.ydot", m, m, 1, 1, seed, Init::kIdentity, false);
    store.add("em.psi", {m, side, side}, std::vector<T>(static_cast<std::size_t>(m) * side * side, T(0)));
    add_conv_params(store, "em.f.in_global", f, 2 * m, 1, 1, seed, Init::kZero, false);
  }
  if (cfg.flags.mprm) {
    for (int b = 0; b < 2; ++b) {
      const std::string p = "em.f.mprm" + std::to_string(b);
      add_conv_params(store, p + ".fc0", f, f, 1, 1, seed);
      add_conv_params(store, p + ".fc1", f, f, 1, 1, seed, Init::kZero);
    }
  }
  add_conv_params(store, "em.f.head", raw_output_count(cfg), f, 1, 1, seed, Init::kZero);
  const double free0 = std::log(std::expm1(1.0 - kSigmaMin));  // prior scale starts at 1
  store.add("em.z_free", {cfg.hyper_channels()},
            std::vector<T>(static_cast<std::size_t>(cfg.hyper_channels()), static_cast<T>(free0)));
}

template <typename T>
EntropyModel<T>::EntropyModel(const ParamStore<T>& store, const ModelConfig& cfg)
    : cfg_(cfg), g_(cfg.mixtures()), mask_(causal_mask<T>()) {
  local_ = ConvLayer<T>::bind(store, "em.local");
  in_hyper_ = ConvLayer<T>::bind(store, "em.f.in_hyper");
  in_local_ = ConvLayer<T>::bind(store, "em.f.in_local");
  if (cfg.flags.global_context) {
    ydot_ = ConvLayer<T>::bind(store, "em.ydot");
    psi_ = store.get("em.psi");
    in_global_ = ConvLayer<T>::bind(store, "em.f.in_global");
  }
  if (cfg.flags.mprm) {
    for (int b = 0; b < 2; ++b) {
      const std::string p = "em.f.mprm" + std::to_string(b);
      mprm_.push_back(ConvLayer<T>::bind(store, p + ".fc0"));
      mprm_.push_back(ConvLayer<T>::bind(store, p + ".fc1"));
    }
  }
  head_ = ConvLayer<T>::bind(store, "em.f.head");
  z_free_ = store.get("em.z_free");
}

template <typename T>
Tensor<T> EntropyModel<T>::local_context(const Tensor<T>& y) const {
  return conv2d(y, local_.weight, local_.bias, 1, std::span<const T>(mask_));
}

template <typename T>
Tensor<T> EntropyModel<T>::ydot(const Tensor<T>& y) const {
  if (!cfg_.flags.global_context) throw ConfigError("ydot requested with global context disabled");
  return ydot_(y);
}

template <typename T>
Tensor<T> EntropyModel<T>::global_context(const Tensor<T>& y) const {
  return jiq::global_context(ydot(y), psi_, cfg_.k, cfg_.min_count);
}

template <typename T>
Tensor<T> EntropyModel<T>::raw_params(const Tensor<T>& hyper, const Tensor<T>& y) const {
  require(y.rank() == 3 && y.dim(0) == cfg_.m, "entropy model: y must be [M,H,W], got " + shape_str(y.shape()));
  require(hyper.shape() == Shape{2 * cfg_.m, y.dim(1), y.dim(2)},
          "entropy model: hyper features " + shape_str(hyper.shape()) + " do not match y");
  Tensor<T> h = add(in_hyper_(hyper), in_local_(local_context(y)));
  if (cfg_.flags.global_context) h = add(h, in_global_(global_context(y)));
  h = lrelu(h);
  for (std::size_t b = 0; b + 1 < mprm_.size(); b += 2) h = add(h, mprm_[b + 1](lrelu(mprm_[b](h))));
  return head_(h);
}

template <typename T>
GmmTensors<T> EntropyModel<T>::split(const Tensor<T>& raw) const {
  const int m = cfg_.m, g = g_;
  require(raw.rank() == 3 && raw.dim(0) == 3 * g * m, "raw parameters " + shape_str(raw.shape()));
  const int h = raw.dim(1), w = raw.dim(2);
  std::vector<int> il, im, is;
  for (int c = 0; c < m; ++c) {
    for (int k = 0; k < g; ++k) {
      il.push_back(c * 3 * g + k);
      im.push_back(c * 3 * g + g + k);
      is.push_back(c * 3 * g + 2 * g + k);
    }
  }
  Tensor<T> logits = reshape(gather(raw, std::span<const int>(il)), {m, g, h, w});
  GmmTensors<T> out;
  out.pi = reshape(softmax(logits, 1), {m * g, h, w});
  out.mu = gather(raw, std::span<const int>(im));
  out.sigma = add_scalar(softplus(gather(raw, std::span<const int>(is))), static_cast<T>(kSigmaMin));
  return out;
}

template <typename T>
Tensor<T> EntropyModel<T>::z_sigma() const {
  return add_scalar(softplus(z_free_), static_cast<T>(kSigmaMin));
}

template <typename T>
Tensor<T> EntropyModel<T>::z_bits(const Tensor<T>& z) const {
  require(z.rank() == 3 && z.dim(0) == cfg_.hyper_channels(), "z must be [N,h,w], got " + shape_str(z.shape()));
  const int h = z.dim(1), w = z.dim(2);
  auto sig = broadcast_channels(z_sigma(), h, w);
  auto pi = Tensor<T>::full(z.shape(), T(1));
  auto mu = Tensor<T>::zeros(z.shape());
  return gmm_bits(z, pi, mu, sig, 1);
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
std::vector<double> param_values(const ParamStore<T>& store, const std::string& name) {
  return to_double(store.get(name).values());
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

void leaky(Eigen::VectorXd& v) {
  for (auto& x : v) x = x > 0.0 ? x : kLeakySlope * x;
}

}  // namespace

template <typename T>
CodingEstimator::CodingEstimator(const ParamStore<T>& store, const ModelConfig& cfg)
    : cfg_(cfg), m_(cfg.m), g_(cfg.mixtures()), f_(cfg.f_width()) {
  local_w_ = param_values(store, "em.local.weight");
  local_b_ = param_values(store, "em.local.bias");
  auto mask = causal_mask<double>();
  for (int i = 0; i < kLocalWindow * kLocalWindow; ++i) {
    if (mask[i] != 0.0) local_taps_.push_back(i);
  }
  in_hyper_w_ = param_values(store, "em.f.in_hyper.weight");
  in_b_ = param_values(store, "em.f.in_hyper.bias");
  in_local_w_ = param_values(store, "em.f.in_local.weight");
  if (cfg.flags.global_context) {
    ydot_w_ = param_values(store, "em.ydot.weight");
    psi_ = param_values(store, "em.psi");
    in_global_w_ = param_values(store, "em.f.in_global.weight");
  }
  if (cfg.flags.mprm) {
    for (int b = 0; b < 2; ++b) {
      const std::string p = "em.f.mprm" + std::to_string(b);
      for (const char* layer : {".fc0", ".fc1"}) {
        mprm_w_.push_back(param_values(store, p + layer + ".weight"));
        mprm_b_.push_back(param_values(store, p + layer + ".bias"));
      }
    }
  }
  head_w_ = param_values(store, "em.f.head.weight");
  head_b_ = param_values(store, "em.f.head.bias");
  for (double v : param_values(store, "em.z_free")) z_sigma_.push_back(softplus(v) + kSigmaMin);
}

void CodingEstimator::reset(std::vector<double> hyper, int height, int width) {
  require(height >= 1 && width >= 1, "coding grid must be non-empty");
  require(hyper.size() == static_cast<std::size_t>(2 * m_) * height * width,
          "hyper features do not match the latent grid");
  hyper_ = std::move(hyper);
  height_ = height;
  width_ = width;
  cursor_ = 0;
  ydot_.assign(cfg_.flags.global_context ? static_cast<std::size_t>(m_) * height * width : 0, 0.0);
}

std::int32_t CodingEstimator::read(const LatentGrid& yhat, int c, int h, int w) {
  if (log_) log_->push_back({cursor_, static_cast<std::int64_t>(h) * width_ + w});
  return yhat.at(c, h, w);
}

std::vector<double> CodingEstimator::local_context_at(const LatentGrid& yhat, int h, int w) {
  require(yhat.channels == m_ && yhat.height == height_ && yhat.width == width_, "latent grid shape mismatch");
  const int c2 = 2 * m_;
  const int r = kLocalWindow / 2;
  std::vector<double> out(local_b_);
  for (int tap : local_taps_) {
    const int yy = h + tap / kLocalWindow - r;
    const int xx = w + tap % kLocalWindow - r;
    if (yy < 0 || xx < 0 || xx >= width_) continue;
    for (int c = 0; c < m_; ++c) {
      const double v = read(yhat, c, yy, xx);
      if (v == 0.0) continue;
      for (int o = 0; o < c2; ++o) {
        out[o] += local_w_[(static_cast<std::size_t>(o) * m_ + c) * kLocalWindow * kLocalWindow + tap] * v;
      }
    }
  }
  return out;
}

std::vector<double> CodingEstimator::ydot_at(const LatentGrid& yhat, int h, int w) const {
  std::vector<double> out(m_, 0.0);
  for (int o = 0; o < m_; ++o) {
    double s = 0.0;
    for (int c = 0; c < m_; ++c) s += ydot_w_[static_cast<std::size_t>(o) * m_ + c] * yhat.at(c, h, w);
    out[o] = s;
  }
  return out;
}

std::vector<double> CodingEstimator::global_context_next() const {
  const std::size_t plane = static_cast<std::size_t>(height_) * width_;
  const int side = 2 * cfg_.k + 1;
  const std::size_t psi_len = static_cast<std::size_t>(side) * side;
  const int ph = static_cast<int>(cursor_ / width_), pw = static_cast<int>(cursor_ % width_);
  std::vector<double> out(2 * m_, 0.0);
  for (int c = 0; c < m_; ++c) {
    auto gc = global_context_at(std::span<const double>(ydot_.data() + c * plane, plane), width_,
                                std::span<const double>(psi_.data() + c * psi_len, psi_len), cfg_.k, ph, pw,
                                cfg_.min_count);
    out[c] = gc.mean;
    out[m_ + c] = gc.stddev;
  }
  return out;
}

std::vector<double> CodingEstimator::raw_from_contexts(std::span<const double> c1, std::span<const double> c2,
                                                       std::span<const double> c3) const {
  const int c_in = 2 * m_;
  require(c1.size() == static_cast<std::size_t>(c_in) && c2.size() == c1.size(), "context size mismatch");
  Eigen::VectorXd h = ConstVecMap(in_b_.data(), f_);
  h.noalias() += ConstMatMap(in_hyper_w_.data(), f_, c_in) * ConstVecMap(c1.data(), c_in);
  h.noalias() += ConstMatMap(in_local_w_.data(), f_, c_in) * ConstVecMap(c2.data(), c_in);
  if (cfg_.flags.global_context) {
    require(c3.size() == c1.size(), "global context size mismatch");
    h.noalias() += ConstMatMap(in_global_w_.data(), f_, c_in) * ConstVecMap(c3.data(), c_in);
  }
  leaky(h);
  for (std::size_t b = 0; b + 1 < mprm_w_.size(); b += 2) {
    Eigen::VectorXd t = ConstVecMap(mprm_b_[b].data(), f_);
    t.noalias() += ConstMatMap(mprm_w_[b].data(), f_, f_) * h;
    leaky(t);
    Eigen::VectorXd u = ConstVecMap(mprm_b_[b + 1].data(), f_);
    u.noalias() += ConstMatMap(mprm_w_[b + 1].data(), f_, f_) * t;
    h += u;
  }
  const int r = 3 * g_ * m_;
  std::vector<double> raw(head_b_);
  VecMap(raw.data(), r).noalias() += ConstMatMap(head_w_.data(), r, f_) * h;
  return raw;
}

std::vector<GmmParams> CodingEstimator::params_from_raw(std::span<const double> raw) const {
  require(raw.size() == static_cast<std::size_t>(3 * g_ * m_), "raw parameter count mismatch");
  std::vector<GmmParams> out(m_);
  for (int c = 0; c < m_; ++c) {
    const double* r = raw.data() + static_cast<std::size_t>(c) * 3 * g_;
    auto& p = out[c];
    p.pi.resize(g_);
    p.mu.assign(r + g_, r + 2 * g_);
    p.sigma.resize(g_);
    double top = *std::max_element(r, r + g_);
    double z = 0.0;
    for (int k = 0; k < g_; ++k) {
      p.pi[k] = std::exp(r[k] - top);
      z += p.pi[k];
    }
    for (int k = 0; k < g_; ++k) {
      p.pi[k] /= z;
      p.sigma[k] = softplus(r[2 * g_ + k]) + kSigmaMin;
    }
  }
  return out;
}

std::vector<GmmParams> CodingEstimator::estimate_next(const LatentGrid& yhat) {
  if (done()) throw ShapeError("estimate_next past the end of the grid");
  const std::size_t plane = static_cast<std::size_t>(height_) * width_;
  const int h = static_cast<int>(cursor_ / width_), w = static_cast<int>(cursor_ % width_);
  std::vector<double> c1(2 * m_);
  for (int c = 0; c < 2 * m_; ++c) c1[c] = hyper_[c * plane + static_cast<std::size_t>(cursor_)];
  auto c2 = local_context_at(yhat, h, w);
  std::vector<double> c3;
  if (cfg_.flags.global_context) c3 = global_context_next();
  return params_from_raw(raw_from_contexts(c1, c2, c3));
}

void CodingEstimator::commit(const LatentGrid& yhat) {
  if (done()) throw ShapeError("commit past the end of the grid");
  if (cfg_.flags.global_context) {
    const std::size_t plane = static_cast<std::size_t>(height_) * width_;
    const int h = static_cast<int>(cursor_ / width_), w = static_cast<int>(cursor_ % width_);
    auto v = ydot_at(yhat, h, w);
    for (int c = 0; c < m_; ++c) ydot_[c * plane + static_cast<std::size_t>(cursor_)] = v[c];
  }
  ++cursor_;
}

#define JIQ_INSTANTIATE(T)                                                                                 \
  template Tensor<T> global_context<T>(const Tensor<T>&, const Tensor<T>&, int, int);                     \
  template Tensor<T> gmm_bits<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, \
                                 int);                                                                     \
  template std::vector<T> causal_mask<T>();                                                               \
  template void add_entropy_params<T>(ParamStore<T>&, const ModelConfig&, std::uint64_t);                 \
  template class EntropyModel<T>;                                                                          \
  template CodingEstimator::CodingEstimator(const ParamStore<T>&, const ModelConfig&);

JIQ_INSTANTIATE(float)
JIQ_INSTANTIATE(double)

}  // namespace jiq
