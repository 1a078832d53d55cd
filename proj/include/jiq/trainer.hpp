#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "jiq/image.hpp"
#include "jiq/model.hpp"
#include "jiq/rng.hpp"
#include "jiq/transforms.hpp"

namespace jiq {

/// Spatial downsampling between an image and its latents y.
inline constexpr int kLatentStride = 16;

enum class DistortionMetric { kMse, kMsssim };

struct TrainConfig {
  double lambda = 0.06;
  ModelConfig model;
  long iterations = 5000;        // joint stage
  long stage_a_iterations = 0;   // enhancement-only stage run before the joint stage
  double learning_rate = 1e-4;
  int batch_size = 1;
  int patch_size = 64;
  int q_crop = 32;               // side of the region fed to the enhancement network
  std::uint64_t seed = 1;
  DistortionMetric distortion = DistortionMetric::kMse;
  int log_every = 1;

  void validate() const;
};

/// `key = value` lines; `#` starts a comment. Unknown or repeated keys, bad
/// values and inconsistent rate-point rows throw ConfigError.
TrainConfig parse_train_config(std::istream& in);
TrainConfig load_train_config(const std::filesystem::path& path);

/// lr0 until the decay window (the last quarter of `total`), then halved every
/// window/6 steps: lr0 / 2^6 at step == total.
double lr_schedule(long step, long total, double lr0);

/// Random square patches fully inside their source images, visited in a
/// seed-determined shuffled order that is redrawn every epoch.
class PatchDataset {
 public:
  PatchDataset(std::vector<Rgb8Image> images, int patch, std::uint64_t seed);
  static PatchDataset from_directory(const std::filesystem::path& dir, int patch, std::uint64_t seed);

  ImageTensor next();
  std::size_t size() const { return images_.size(); }
  int patch() const { return patch_; }

 private:
  void reshuffle();

  std::vector<Rgb8Image> images_;
  int patch_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

/// Smooth gradients, flat shapes and mild texture; stands in for natural
/// images in tests and toy experiments.
Rgb8Image toy_image(int width, int height, std::uint64_t seed);

/// A square crop aligned to the latent grid and the latent region it covers.
struct CropRegion {
  int x = 0;  // pixel offset
  int y = 0;
  int size = 0;

  int latent_x() const { return x / kLatentStride; }
  int latent_y() const { return y / kLatentStride; }
  int latent_size() const { return size / kLatentStride; }
};

/// Throws ConfigError unless offset and size are multiples of the latent stride.
CropRegion aligned_crop(int x, int y, int size);
/// Uniform over aligned crops of `size` inside a width x height image.
CropRegion random_aligned_crop(int width, int height, int size, Rng& rng);

struct LossOptions {
  double lambda = 0.06;
  QuantMode quant = QuantMode::kNoise;
  DistortionMetric distortion = DistortionMetric::kMse;
  bool enhance = true;               // pass x̂ through Q when the model has it
  bool distortion_only = false;      // transforms run without gradients, rate term dropped
  std::optional<CropRegion> crop;    // region seen by Q and by both loss terms
};

template <typename T>
struct LossTerms {
  Tensor<T> loss;
  double rate_bits = 0.0;   // y bits over the loss region plus area-scaled z bits
  double distortion = 0.0;  // MSE on the 0..255 scale, or 1 - MS-SSIM
  int latent_height = 0;
  int latent_width = 0;
};

/// lambda / (W_y H_y 256) * R + (1 - lambda) / 1000 * D for MSE;
/// the MS-SSIM variant uses (1 - lambda) * 50 * (1 - MS-SSIM).
double rd_loss_value(double lambda, double rate_bits, int latent_width, int latent_height, double distortion,
                     DistortionMetric metric = DistortionMetric::kMse);

/// Rate-distortion loss of one image. Noise quantization needs `rng`.
template <typename T>
LossTerms<T> total_loss(const ImageTensor& x, const Model<T>& model, const LossOptions& opt, Rng* rng);

template <typename T>
class Adam {
 public:
  explicit Adam(std::vector<Tensor<T>> params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(double lr);
  long steps() const { return t_; }

 private:
  std::vector<Tensor<T>> params_;
  std::vector<std::vector<double>> m_, v_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
};

enum class Stage {
  kEnhancement,  // Q alone on the codec's reconstructions, distortion only
  kJoint,        // every parameter on the full loss
  kCodec,        // transforms and entropy model on the full loss, Q bypassed
};

const char* stage_name(Stage s);

struct TrainLogRow {
  long step = 0;
  double loss = 0.0;
  double rate_bits = 0.0;
  double distortion = 0.0;
  double lr = 0.0;
  double grad_norm = 0.0;
};

/// Parameters a stage updates.
std::vector<Tensor<float>> stage_parameters(const Model<float>& model, Stage stage);

/// Runs `iterations` optimizer steps of one stage with a fresh Adam state.
/// Steps are numbered from `first_step`. Rows go to `csv` (without header)
/// every cfg.log_every steps and on the last step.
std::vector<TrainLogRow> train_stage(Model<float>& model, const TrainConfig& cfg, PatchDataset& data, Stage stage,
                                     long iterations, long first_step = 0, std::ostream* csv = nullptr);

inline constexpr const char* kTrainLogHeader = "step,loss,rate_bits,distortion,lr";

/// Enhancement-only stage for cfg.stage_a_iterations steps, then the joint
/// stage for cfg.iterations. Stage boundaries are reported on `info`.
std::vector<TrainLogRow> train_procedure(Model<float>& model, const TrainConfig& cfg, PatchDataset& data,
                                         std::ostream* csv = nullptr, std::ostream* info = nullptr);

/// Mean total loss over full images with rounding, as used for model comparisons.
template <typename T>
double evaluate_loss(const Model<T>& model, const std::vector<ImageTensor>& images, double lambda,
                     DistortionMetric metric = DistortionMetric::kMse);

struct AblationVariant {
  std::string label;
  ModelFlags flags;
};

/// full, no-grdn, no-gc, no-gc-mprm, single-gaussian.
std::vector<AblationVariant> ablation_variants();

struct SeparateJointReport {
  double separate_loss = 0.0;
  double joint_loss = 0.0;
};

/// Trains the two cascades from one initialization: the codec alone followed
/// by Q on its frozen output, and the full procedure with a joint stage.
/// Writes separate.ckpt and joint.ckpt into `out_dir`.
SeparateJointReport separate_vs_joint(const TrainConfig& cfg, PatchDataset data,
                                      const std::vector<ImageTensor>& held_out,
                                      const std::filesystem::path& out_dir);

}  // namespace jiq
