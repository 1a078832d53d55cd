#include "jiq/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "jiq/error.hpp"
#include "jiq/metrics.hpp"
#include "jiq/ops.hpp"

namespace jiq {

namespace {

constexpr double kDecayWindowFraction = 0.25;
constexpr int kDecayHalvings = 6;
constexpr double kMsssimScale = 50.0;
constexpr double kPixelScale = 127.5;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct ConfigReader {
  int line = 0;
  std::string key;
  std::string value;

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("config line " + std::to_string(line) + " (" + key + "): " + what);
  }
  double number() const {
    try {
      std::size_t used = 0;
      const double v = std::stod(value, &used);
      if (used != value.size() || !std::isfinite(v)) fail("not a number: '" + value + "'");
      return v;
    } catch (const std::logic_error&) {
      fail("not a number: '" + value + "'");
    }
  }
  long integer() const {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(value, &used);
      if (used != value.size()) fail("not an integer: '" + value + "'");
      return static_cast<long>(v);
    } catch (const std::logic_error&) {
      fail("not an integer: '" + value + "'");
    }
  }
  int small_int() const {
    const long v = integer();
    if (v < -1000000 || v > 1000000) fail("out of range");
    return static_cast<int>(v);
  }
  bool boolean() const {
    if (value == "true" || value == "1" || value == "on") return true;
    if (value == "false" || value == "0" || value == "off") return false;
    fail("expected true or false, got '" + value + "'");
  }
};

template <typename T>
Tensor<T> to_pixel_scale(const Tensor<T>& x) {
  return add_scalar(scale(x, static_cast<T>(kPixelScale)), static_cast<T>(kPixelScale));
}

template <typename T>
GmmTensors<T> crop_params(const GmmTensors<T>& p, int top, int left, int size) {
  return {crop(p.pi, top, left, size, size), crop(p.mu, top, left, size, size),
          crop(p.sigma, top, left, size, size)};
}

std::uint8_t clamp_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

}  // namespace

void TrainConfig::validate() const {
  model.validate();
  if (!(lambda > 0.0 && lambda < 1.0)) throw ConfigError("lambda must lie in (0, 1)");
  if (iterations < 0 || stage_a_iterations < 0) throw ConfigError("iteration counts must be non-negative");
  if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be non-negative");
  if (batch_size < 1) throw ConfigError("batch must be positive");
  if (patch_size < kLatentStride || patch_size % kLatentStride != 0) {
    throw ConfigError("patch must be a positive multiple of " + std::to_string(kLatentStride));
  }
  if (q_crop < kLatentStride || q_crop % kLatentStride != 0 || q_crop > patch_size) {
    throw ConfigError("q_crop must be a multiple of " + std::to_string(kLatentStride) + " no larger than patch");
  }
  if (distortion == DistortionMetric::kMsssim && q_crop < 16) throw ConfigError("MS-SSIM needs q_crop >= 16");
  if (log_every < 1) throw ConfigError("log_every must be positive");
  if (const RatePoint* rp = find_rate_point(model.model_id); rp && std::abs(rp->lambda - lambda) > 1e-12) {
    throw ConfigError("model_id " + std::to_string(model.model_id) + " is the lambda=" + std::to_string(rp->lambda) +
                      " rate point");
  }
}

TrainConfig parse_train_config(std::istream& in) {
  TrainConfig cfg;
  std::set<std::string> seen;
  std::string raw;
  ConfigReader r;
  while (std::getline(in, raw)) {
    ++r.line;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    r.key = trim(line.substr(0, eq));
    if (eq == std::string::npos) r.fail("expected 'key = value'");
    r.value = trim(line.substr(eq + 1));
    if (r.value.empty()) r.fail("missing value");
    if (!seen.insert(r.key).second) r.fail("repeated key");
    const std::string& k = r.key;
    ModelConfig& m = cfg.model;
    if (k == "lambda") cfg.lambda = r.number();
    else if (k == "model_id") m.model_id = r.small_int();
    else if (k == "n") m.n = r.small_int();
    else if (k == "m") m.m = r.small_int();
    else if (k == "g") m.g = r.small_int();
    else if (k == "k") m.k = r.small_int();
    else if (k == "min_count") m.min_count = r.small_int();
    else if (k == "f_width_mult") m.f_width_mult = r.small_int();
    else if (k == "grdbs") m.grdn.num_grdbs = r.small_int();
    else if (k == "rdbs_per_grdb") m.grdn.rdbs_per_grdb = r.small_int();
    else if (k == "convs_per_rdb") m.grdn.convs_per_rdb = r.small_int();
    else if (k == "grdn_channels") m.grdn.kernels_per_conv = r.small_int();
    else if (k == "global_context") m.flags.global_context = r.boolean();
    else if (k == "gmm") m.flags.gmm = r.boolean();
    else if (k == "enhancement") m.flags.enhancement = r.boolean();
    else if (k == "mprm") m.flags.mprm = r.boolean();
    else if (k == "iters") cfg.iterations = r.integer();
    else if (k == "stage_a_iters") cfg.stage_a_iterations = r.integer();
    else if (k == "lr") cfg.learning_rate = r.number();
    else if (k == "batch") cfg.batch_size = r.small_int();
    else if (k == "patch") cfg.patch_size = r.small_int();
    else if (k == "q_crop") cfg.q_crop = r.small_int();
    else if (k == "seed") cfg.seed = static_cast<std::uint64_t>(r.integer());
    else if (k == "log_every") cfg.log_every = r.small_int();
    else if (k == "distortion") {
      if (r.value == "mse") cfg.distortion = DistortionMetric::kMse;
      else if (r.value == "msssim") cfg.distortion = DistortionMetric::kMsssim;
      else r.fail("expected mse or msssim");
    } else {
      r.fail("unknown key");
    }
  }
  // A rate-point id supplies lambda, n and m unless they are given explicitly.
  if (const RatePoint* rp = find_rate_point(cfg.model.model_id)) {
    if (!seen.count("lambda")) cfg.lambda = rp->lambda;
    if (!seen.count("n")) cfg.model.n = rp->n;
    if (!seen.count("m")) cfg.model.m = rp->m;
  } else if (cfg.model.model_id != 0) {
    throw ConfigError("model_id " + std::to_string(cfg.model.model_id) + " is not a built-in rate point");
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  return parse_train_config(in);
}

double lr_schedule(long step, long total, double lr0) {
  const long window = static_cast<long>(std::llround(kDecayWindowFraction * static_cast<double>(total)));
  const long interval = std::max(1L, window / kDecayHalvings);
  const long start = total - window;
  if (step < start) return lr0;
  const long halvings = std::min<long>(kDecayHalvings, (step - start) / interval);
  return lr0 / static_cast<double>(1L << halvings);
}

PatchDataset::PatchDataset(std::vector<Rgb8Image> images, int patch, std::uint64_t seed)
    : images_(std::move(images)), patch_(patch), rng_(derive_seed(seed, "dataset")) {
  if (images_.empty()) throw FormatError("dataset has no images");
  if (patch_ < 1) throw ConfigError("patch size must be positive");
  for (const auto& img : images_) {
    if (img.width < patch_ || img.height < patch_) {
      throw FormatError("image of " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                        " is smaller than the " + std::to_string(patch_) + " pixel patch");
    }
  }
  reshuffle();
}

PatchDataset PatchDataset::from_directory(const std::filesystem::path& dir, int patch, std::uint64_t seed) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("not a directory: " + dir.string());
  std::vector<Rgb8Image> images;
  for (const auto& p : list_images(dir)) images.push_back(read_image(p));
  if (images.empty()) throw FormatError("no .png or .ppm images in " + dir.string());
  return PatchDataset(std::move(images), patch, seed);
}

void PatchDataset::reshuffle() {
  order_.resize(images_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[rng_.below(i)]);
  cursor_ = 0;
}

ImageTensor PatchDataset::next() {
  if (cursor_ == order_.size()) reshuffle();
  const Rgb8Image& img = images_[order_[cursor_++]];
  const int ox = static_cast<int>(rng_.below(static_cast<std::uint64_t>(img.width - patch_ + 1)));
  const int oy = static_cast<int>(rng_.below(static_cast<std::uint64_t>(img.height - patch_ + 1)));
  Rgb8Image patch{patch_, patch_, std::vector<std::uint8_t>(static_cast<std::size_t>(patch_) * patch_ * 3)};
  for (int y = 0; y < patch_; ++y) {
    const auto* src = img.pixels.data() + (static_cast<std::size_t>(oy + y) * img.width + ox) * 3;
    std::copy(src, src + 3 * patch_, patch.pixels.data() + static_cast<std::size_t>(y) * patch_ * 3);
  }
  return to_tensor(patch);
}

Rgb8Image toy_image(int width, int height, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "toy_image"));
  std::vector<double> img(static_cast<std::size_t>(width) * height * 3);
  double c0[3], c1[3];
  for (int c = 0; c < 3; ++c) {
    c0[c] = rng.uniform(20, 235);
    c1[c] = rng.uniform(20, 235);
  }
  const double angle = rng.uniform(0, 2 * M_PI);
  const double dx = std::cos(angle), dy = std::sin(angle);
  const double fx = rng.uniform(0.05, 0.4), fy = rng.uniform(0.05, 0.4), amp = rng.uniform(2, 12);
  const double diag = std::hypot(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double t = std::clamp(0.5 + (dx * (x - width / 2.0) + dy * (y - height / 2.0)) / diag, 0.0, 1.0);
      const double tex = amp * std::sin(fx * x) * std::cos(fy * y);
      for (int c = 0; c < 3; ++c) img[(static_cast<std::size_t>(y) * width + x) * 3 + c] = c0[c] + t * (c1[c] - c0[c]) + tex;
    }
  }
  const int shapes = 3 + static_cast<int>(rng.below(4));
  for (int s = 0; s < shapes; ++s) {
    const bool disc = rng.uniform() < 0.5;
    const double cx = rng.uniform(0, width), cy = rng.uniform(0, height);
    const double rx = rng.uniform(0.08, 0.3) * width, ry = rng.uniform(0.08, 0.3) * height;
    double col[3];
    for (auto& v : col) v = rng.uniform(0, 255);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double u = (x - cx) / rx, v = (y - cy) / ry;
        const bool inside = disc ? u * u + v * v <= 1.0 : std::abs(u) <= 1.0 && std::abs(v) <= 1.0;
        if (!inside) continue;
        for (int c = 0; c < 3; ++c) img[(static_cast<std::size_t>(y) * width + x) * 3 + c] = col[c];
      }
    }
  }
  Rgb8Image out{width, height, std::vector<std::uint8_t>(img.size())};
  for (std::size_t i = 0; i < img.size(); ++i) out.pixels[i] = clamp_byte(img[i] + rng.uniform(-3, 3));
  return out;
}

CropRegion aligned_crop(int x, int y, int size) {
  if (x < 0 || y < 0 || size < kLatentStride || x % kLatentStride || y % kLatentStride || size % kLatentStride) {
    throw ConfigError("crop offsets and size must be non-negative multiples of " + std::to_string(kLatentStride));
  }
  return {x, y, size};
}

CropRegion random_aligned_crop(int width, int height, int size, Rng& rng) {
  if (size > width || size > height) throw ConfigError("crop larger than the image");
  const auto nx = static_cast<std::uint64_t>((width - size) / kLatentStride + 1);
  const auto ny = static_cast<std::uint64_t>((height - size) / kLatentStride + 1);
  const int x = static_cast<int>(rng.below(nx)) * kLatentStride;
  const int y = static_cast<int>(rng.below(ny)) * kLatentStride;
  return aligned_crop(x, y, size);
}

double rd_loss_value(double lambda, double rate_bits, int latent_width, int latent_height, double distortion,
                     DistortionMetric metric) {
  const double rate_term = lambda / (static_cast<double>(latent_width) * latent_height * 256.0) * rate_bits;
  const double dist_weight = metric == DistortionMetric::kMse ? (1.0 - lambda) / 1000.0 : (1.0 - lambda) * kMsssimScale;
  return rate_term + dist_weight * distortion;
}

template <typename T>
LossTerms<T> total_loss(const ImageTensor& x, const Model<T>& model, const LossOptions& opt, Rng* rng) {
  const auto& tr = model.transforms();
  const auto& em = model.entropy();
  auto [padded, record] = pad_for_scales(x, kImageScales);
  const auto xt = image_to_tensor<T>(padded);
  const int hy = record.height_at(kImageScales), wy = record.width_at(kImageScales);

  Tensor<T> xhat, rate;
  if (opt.distortion_only) {
    NoGradGuard no_grad;
    xhat = tr.synthesis(quantize(tr.analysis(xt), QuantMode::kRound), record);
  } else {
    const auto yq = quantize(tr.analysis(xt), opt.quant, rng);
    const auto zq = quantize(tr.hyper_analysis(yq), opt.quant, rng);
    const auto params = em.estimate(tr.hyper_synthesis(zq, hy, wy), yq);
    xhat = tr.synthesis(yq, record);
    if (opt.crop) {
      const CropRegion& c = *opt.crop;
      const int ls = c.latent_size();
      if (c.latent_y() + ls > hy || c.latent_x() + ls > wy) throw ConfigError("crop exceeds the latent grid");
      const auto ybits = em.y_bits(crop(yq, c.latent_y(), c.latent_x(), ls, ls),
                                   crop_params(params, c.latent_y(), c.latent_x(), ls));
      const T area = static_cast<T>(static_cast<double>(ls) * ls / (static_cast<double>(hy) * wy));
      rate = add(ybits, scale(em.z_bits(zq), area));
    } else {
      rate = add(em.y_bits(yq, params), em.z_bits(zq));
    }
  }

  Tensor<T> reference, xprime;
  int lh = hy, lw = wy;
  const bool use_q = opt.enhance && model.has_enhancement();
  if (opt.crop) {
    const CropRegion& c = *opt.crop;
    if (c.y + c.size > x.height || c.x + c.size > x.width) throw ConfigError("crop exceeds the image");
    reference = crop(xt, c.y, c.x, c.size, c.size);
    xprime = crop(xhat, c.y, c.x, c.size, c.size);
    if (use_q) xprime = model.enhancer().forward(xprime);
    lh = lw = c.latent_size();
  } else {
    if (use_q) xhat = model.enhancer().forward(xhat);
    reference = crop(xt, 0, 0, x.height, x.width);
    xprime = crop(xhat, 0, 0, x.height, x.width);
  }

  Tensor<T> dist;
  if (opt.distortion == DistortionMetric::kMse) {
    dist = scale(mean(square(sub(xprime, reference))), static_cast<T>(kPixelScale * kPixelScale));
  } else {
    dist = add_scalar(scale(ms_ssim(to_pixel_scale(xprime), to_pixel_scale(reference)), T(-1)), T(1));
  }
  const T dist_weight = static_cast<T>(opt.distortion == DistortionMetric::kMse ? (1.0 - opt.lambda) / 1000.0
                                                                                 : (1.0 - opt.lambda) * kMsssimScale);
  LossTerms<T> out;
  out.loss = scale(dist, dist_weight);
  if (!opt.distortion_only) {
    const T rate_weight = static_cast<T>(opt.lambda / (static_cast<double>(lw) * lh * 256.0));
    out.loss = add(scale(rate, rate_weight), out.loss);
    out.rate_bits = static_cast<double>(rate.item());
  }
  out.distortion = static_cast<double>(dist.item());
  out.latent_height = lh;
  out.latent_width = lw;
  return out;
}

template <typename T>
Adam<T>::Adam(std::vector<Tensor<T>> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

template <typename T>
void Adam<T>::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    const auto g = p.grad();
    auto values = p.mutable_values();
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double gj = g.empty() ? 0.0 : static_cast<double>(g[j]);
      m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * gj;
      v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * gj * gj;
      values[j] -= static_cast<T>(lr * (m_[i][j] / c1) / (std::sqrt(v_[i][j] / c2) + eps_));
    }
  }
}

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::kEnhancement: return "a";
    case Stage::kJoint: return "b";
    case Stage::kCodec: return "codec";
  }
  return "?";
}

std::vector<Tensor<float>> stage_parameters(const Model<float>& model, Stage stage) {
  switch (stage) {
    case Stage::kEnhancement: return model.tensors_with_prefix({"q."});
    case Stage::kJoint: return model.params().tensors();
    case Stage::kCodec: return model.tensors_with_prefix({"ga.", "gs.", "ha.", "hs.", "em."});
  }
  return {};
}

std::vector<TrainLogRow> train_stage(Model<float>& model, const TrainConfig& cfg, PatchDataset& data, Stage stage,
                                     long iterations, long first_step, std::ostream* csv) {
  if (data.patch() != cfg.patch_size) throw ConfigError("dataset patch size differs from the config");
  auto params = stage_parameters(model, stage);
  if (params.empty()) throw ConfigError(std::string("stage ") + stage_name(stage) + " has no parameters to train");
  Adam<float> adam(params);
  Rng noise(derive_seed(cfg.seed, std::string("noise/") + stage_name(stage)));
  Rng crops(derive_seed(cfg.seed, std::string("crop/") + stage_name(stage)));
  LossOptions opt;
  opt.lambda = cfg.lambda;
  opt.distortion = cfg.distortion;
  opt.enhance = stage != Stage::kCodec;
  opt.distortion_only = stage == Stage::kEnhancement;

  std::vector<TrainLogRow> log;
  for (long it = 0; it < iterations; ++it) {
    const long step = first_step + it;
    TrainLogRow row;
    row.step = step;
    row.lr = lr_schedule(it, iterations, cfg.learning_rate);
    try {
      for (auto t : model.params().tensors()) t.zero_grad();
      Tensor<float> total;
      for (int b = 0; b < cfg.batch_size; ++b) {
        const ImageTensor x = data.next();
        opt.crop.reset();
        if (cfg.q_crop < cfg.patch_size) opt.crop = random_aligned_crop(x.width, x.height, cfg.q_crop, crops);
        auto terms = total_loss(x, model, opt, &noise);
        total = total.defined() ? add(total, terms.loss) : terms.loss;
        row.rate_bits += terms.rate_bits / cfg.batch_size;
        row.distortion += terms.distortion / cfg.batch_size;
      }
      auto loss = scale(total, 1.0f / static_cast<float>(cfg.batch_size));
      row.loss = loss.item();
      backward(loss, std::span<const Tensor<float>>(params));
      double sq = 0.0;
      for (const auto& p : params) {
        for (float g : p.grad()) sq += static_cast<double>(g) * g;
      }
      row.grad_norm = std::sqrt(sq);
      if (!std::isfinite(row.grad_norm)) throw NumericError("non-finite gradient norm");
      adam.step(row.lr);
    } catch (const NumericError& e) {
      throw NumericError(std::string("stage ") + stage_name(stage) + ", step " + std::to_string(step) + ": " + e.what());
    }
    if (csv && (it % cfg.log_every == 0 || it + 1 == iterations)) {
      *csv << row.step << ',' << std::setprecision(9) << row.loss << ',' << row.rate_bits << ',' << row.distortion
           << ',' << row.lr << '\n';
    }
    log.push_back(row);
  }
  return log;
}

std::vector<TrainLogRow> train_procedure(Model<float>& model, const TrainConfig& cfg, PatchDataset& data,
                                         std::ostream* csv, std::ostream* info) {
  std::vector<TrainLogRow> log;
  long step = 0;
  if (cfg.stage_a_iterations > 0) {
    if (model.has_enhancement()) {
      if (info) *info << "stage a: steps " << step << ".." << step + cfg.stage_a_iterations - 1 << '\n';
      log = train_stage(model, cfg, data, Stage::kEnhancement, cfg.stage_a_iterations, step, csv);
      step += cfg.stage_a_iterations;
    } else if (info) {
      *info << "stage a: skipped, model has no enhancement network\n";
    }
  }
  if (cfg.iterations > 0) {
    if (info) *info << "stage b: steps " << step << ".." << step + cfg.iterations - 1 << '\n';
    auto b = train_stage(model, cfg, data, Stage::kJoint, cfg.iterations, step, csv);
    log.insert(log.end(), b.begin(), b.end());
  }
  return log;
}

template <typename T>
double evaluate_loss(const Model<T>& model, const std::vector<ImageTensor>& images, double lambda,
                     DistortionMetric metric) {
  if (images.empty()) throw ConfigError("evaluate_loss needs at least one image");
  NoGradGuard no_grad;
  LossOptions opt;
  opt.lambda = lambda;
  opt.quant = QuantMode::kRound;
  opt.distortion = metric;
  double sum = 0.0;
  for (const auto& img : images) sum += static_cast<double>(total_loss(img, model, opt, nullptr).loss.item());
  return sum / static_cast<double>(images.size());
}

std::vector<AblationVariant> ablation_variants() {
  return {
      {"full", ModelFlags{true, true, true, true}},
      {"no-grdn", ModelFlags{true, true, false, true}},
      {"no-gc", ModelFlags{false, true, true, true}},
      {"no-gc-mprm", ModelFlags{false, true, true, false}},
      {"single-gaussian", ModelFlags{true, false, true, true}},
  };
}

SeparateJointReport separate_vs_joint(const TrainConfig& cfg, PatchDataset data,
                                      const std::vector<ImageTensor>& held_out,
                                      const std::filesystem::path& out_dir) {
  if (!cfg.model.flags.enhancement) throw ConfigError("the separate/joint comparison needs an enhancement network");
  std::filesystem::create_directories(out_dir);
  PatchDataset joint_data = data;

  Model<float> separate(cfg.model, cfg.seed);
  train_stage(separate, cfg, data, Stage::kCodec, cfg.iterations, 0);
  if (cfg.stage_a_iterations > 0) {
    train_stage(separate, cfg, data, Stage::kEnhancement, cfg.stage_a_iterations, cfg.iterations);
  }
  separate.save(out_dir / "separate.ckpt");

  Model<float> joint(cfg.model, cfg.seed);
  train_procedure(joint, cfg, joint_data);
  joint.save(out_dir / "joint.ckpt");

  return {evaluate_loss(separate, held_out, cfg.lambda, cfg.distortion),
          evaluate_loss(joint, held_out, cfg.lambda, cfg.distortion)};
}

template LossTerms<float> total_loss(const ImageTensor&, const Model<float>&, const LossOptions&, Rng*);
template LossTerms<double> total_loss(const ImageTensor&, const Model<double>&, const LossOptions&, Rng*);
template class Adam<float>;
template class Adam<double>;
template double evaluate_loss(const Model<float>&, const std::vector<ImageTensor>&, double, DistortionMetric);
template double evaluate_loss(const Model<double>&, const std::vector<ImageTensor>&, double, DistortionMetric);

}  // namespace jiq
