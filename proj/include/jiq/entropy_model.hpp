#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "jiq/checkpoint.hpp"
#include "jiq/layers.hpp"
#include "jiq/model_config.hpp"
#include "jiq/tensor.hpp"
#include "jiq/transforms.hpp"

namespace jiq {

inline constexpr double kSigmaMin = 1e-3;
inline constexpr double kDenominatorEps = 1e-6;  // floor of 1 - sum(w^2)
inline constexpr double kLikelihoodFloor = 1e-9;
inline constexpr int kLocalWindow = 5;

// Latent alphabet: n in [-255, 255] maps to symbol n + 256; symbol 0 is the
// low tail (n <= -256) and symbol 512 the high tail (n >= 256).
inline constexpr int kAlphabetSize = 2 * kLatentClamp + 3;
inline constexpr int kLowTail = -kLatentClamp - 1;
inline constexpr int kHighTail = kLatentClamp + 1;
constexpr int symbol_of(int n) { return n - kLowTail; }
constexpr int value_of(int symbol) { return symbol + kLowTail; }

double std_normal_cdf(double x);
/// Probability of [lo, hi] under N(mu, sigma^2); accurate in both tails.
double gaussian_interval_mass(double lo, double hi, double mu, double sigma);

/// Mixture parameters of one latent.
struct GmmParams {
  std::vector<double> pi;
  std::vector<double> mu;
  std::vector<double> sigma;

  int components() const { return static_cast<int>(pi.size()); }
};

/// Mixture mass of [v - 1/2, v + 1/2]: the density convolved with a unit
/// uniform, evaluated at a real (noisy) or integer value.
double gmm_likelihood(const GmmParams& p, double v);
/// PMF at integer n in [-255, 255], or the tail masses for n = kLowTail / kHighTail.
double gmm_pmf(const GmmParams& p, int n);
/// All kAlphabetSize symbol probabilities.
std::vector<double> gmm_pmf_table(const GmmParams& p);
/// Zero-mean single Gaussian used for the hyper latents.
double z_pmf(double sigma, int n);

/// max(-k, min(k, x)).
constexpr int clip_offset(int x, int k) { return x < -k ? -k : (x > k ? k : x); }

/// Softmax weights over the causal region of (ph, pw): every earlier row plus
/// the positions left of pw, in raster order. psi: (2k+1)^2 row-major, the
/// weight for offset (dy, dx) sits at [(dy + k) * (2k + 1) + dx + k].
std::vector<double> build_weight_field(std::span<const double> psi, int k, int ph, int pw, int width);

struct GlobalContext {
  double mean = 0.0;
  double stddev = 0.0;
};

/// Weighted mean and weighted (bias-corrected) standard deviation of one ẏ
/// channel over the causal region; (0, 0) when fewer than min_count positions
/// precede (ph, pw). Only plane entries before ph * width + pw are read.
GlobalContext global_context_at(std::span<const double> plane, int width, std::span<const double> psi, int k,
                                int ph, int pw, int min_count);

/// Graph op over a whole grid. ydot: [M, H, W]; psi: [M, 2k+1, 2k+1].
/// Returns [2M, H, W]: weighted means in channels [0, M), deviations in [M, 2M).
template <typename T>
Tensor<T> global_context(const Tensor<T>& ydot, const Tensor<T>& psi, int k, int min_count);

/// Graph op: -sum log2 of gmm_likelihood over all entries of y [M, H, W];
/// pi, mu, sigma are [M*G, H, W] with component g of channel c at c*G + g.
/// Likelihoods below kLikelihoodFloor are clamped (zero gradient there).
template <typename T>
Tensor<T> gmm_bits(const Tensor<T>& y, const Tensor<T>& pi, const Tensor<T>& mu, const Tensor<T>& sigma,
                   int g);

/// 0/1 mask of the 5x5 causal window: the two rows above and the two
/// positions to the left.
template <typename T>
std::vector<T> causal_mask();

/// Number of raw estimator outputs per position: 3 * G * M.
int raw_output_count(const ModelConfig& cfg);

/// Registers entropy-model parameters under "em.".
template <typename T>
void add_entropy_params(ParamStore<T>& store, const ModelConfig& cfg, std::uint64_t seed);

template <typename T>
struct GmmTensors {
  Tensor<T> pi;     // [M*G, H, W]
  Tensor<T> mu;
  Tensor<T> sigma;
};

/// Whole-grid (training) evaluation of the conditional prior.
template <typename T>
class EntropyModel {
 public:
  EntropyModel(const ParamStore<T>& store, const ModelConfig& cfg);

  /// c'' : masked causal 5x5 conv, [2M, H, W].
  Tensor<T> local_context(const Tensor<T>& y) const;
  /// ẏ : per-position linear map of y, [M, H, W].
  Tensor<T> ydot(const Tensor<T>& y) const;
  /// c''' : [2M, H, W].
  Tensor<T> global_context(const Tensor<T>& y) const;
  /// f applied at every position, [3GM, H, W].
  Tensor<T> raw_params(const Tensor<T>& hyper, const Tensor<T>& y) const;
  GmmTensors<T> split(const Tensor<T>& raw) const;
  GmmTensors<T> estimate(const Tensor<T>& hyper, const Tensor<T>& y) const { return split(raw_params(hyper, y)); }

  Tensor<T> y_bits(const Tensor<T>& y, const GmmTensors<T>& p) const { return gmm_bits(y, p.pi, p.mu, p.sigma, g_); }
  /// Per-channel prior scale of the hyper latents, [N].
  Tensor<T> z_sigma() const;
  Tensor<T> z_bits(const Tensor<T>& z) const;

 private:
  ModelConfig cfg_;
  int g_;
  ConvLayer<T> local_;
  ConvLayer<T> ydot_;
  Tensor<T> psi_;
  ConvLayer<T> in_hyper_;
  ConvLayer<T> in_local_;
  ConvLayer<T> in_global_;
  std::vector<ConvLayer<T>> mprm_;  // pairs per residual block
  ConvLayer<T> head_;
  Tensor<T> z_free_;
  std::vector<T> mask_;
};

/// Raster index of a latent read made while estimating the position at `cursor`.
struct AccessRecord {
  std::int64_t cursor;
  std::int64_t read;
};

/// Sequential per-position evaluation of the same prior in double precision.
/// Encoder and decoder both run this path, so their CDF tables agree exactly.
/// Positions are visited in raster order: estimate_next() then commit().
class CodingEstimator {
 public:
  template <typename T>
  CodingEstimator(const ParamStore<T>& store, const ModelConfig& cfg);

  /// hyper: h_s output [2M, H, W] as raster values.
  void reset(std::vector<double> hyper, int height, int width);
  void set_access_log(std::vector<AccessRecord>* log) { log_ = log; }

  std::int64_t cursor() const { return cursor_; }
  bool done() const { return cursor_ == static_cast<std::int64_t>(height_) * width_; }
  int height() const { return height_; }
  int width() const { return width_; }

  /// GMM parameters of all M channels at the cursor. Reads yhat only at
  /// earlier raster positions.
  std::vector<GmmParams> estimate_next(const LatentGrid& yhat);
  /// Records the cursor position as decoded and advances.
  void commit(const LatentGrid& yhat);

  std::vector<double> local_context_at(const LatentGrid& yhat, int h, int w);
  std::vector<double> ydot_at(const LatentGrid& yhat, int h, int w) const;
  /// c''' at the cursor from committed ẏ values, [2M] (means then deviations).
  std::vector<double> global_context_next() const;
  std::vector<double> raw_from_contexts(std::span<const double> c1, std::span<const double> c2,
                                        std::span<const double> c3) const;
  std::vector<GmmParams> params_from_raw(std::span<const double> raw) const;

  const std::vector<double>& z_sigma() const { return z_sigma_; }
  const ModelConfig& config() const { return cfg_; }

 private:
  std::int32_t read(const LatentGrid& yhat, int c, int h, int w);

  ModelConfig cfg_;
  int m_;
  int g_;
  int f_;
  std::vector<double> local_w_, local_b_;  // [2M, M, 5, 5]
  std::vector<int> local_taps_;            // mask indices kh * 5 + kw that are set
  std::vector<double> ydot_w_;             // [M, M]
  std::vector<double> psi_;                // [M, (2k+1)^2]
  std::vector<double> in_hyper_w_, in_local_w_, in_global_w_, in_b_;
  std::vector<std::vector<double>> mprm_w_, mprm_b_;
  std::vector<double> head_w_, head_b_;
  std::vector<double> z_sigma_;

  std::vector<double> hyper_;
  std::vector<double> ydot_;  // [M, H*W], filled up to the cursor
  int height_ = 0;
  int width_ = 0;
  std::int64_t cursor_ = 0;
  std::vector<AccessRecord>* log_ = nullptr;
};

}  // namespace jiq
