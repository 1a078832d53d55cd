#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "jiq/checkpoint.hpp"
#include "jiq/image.hpp"
#include "jiq/layers.hpp"
#include "jiq/model_config.hpp"
#include "jiq/rng.hpp"
#include "jiq/tensor.hpp"

namespace jiq {

inline constexpr int kImageScales = 4;  // g_a halvings
inline constexpr int kHyperScales = 2;  // h_a halvings
inline constexpr int kLatentClamp = 255;

/// Original extents plus, per halving stage, whether one line was appended
/// because the extent at that stage was odd.
struct PaddingRecord {
  int width = 0;
  int height = 0;
  std::vector<bool> pad_w;
  std::vector<bool> pad_h;

  int num_scales() const { return static_cast<int>(pad_w.size()); }
  /// Unpadded extent at scale s; s = 0 is the original image.
  int width_at(int s) const;
  int height_at(int s) const;
  /// Extent at scale s after that stage's pad line (input to the next halving).
  int padded_width_at(int s) const { return width_at(s) + (pad_w.at(s) ? 1 : 0); }
  int padded_height_at(int s) const { return height_at(s) + (pad_h.at(s) ? 1 : 0); }
  bool operator==(const PaddingRecord&) const = default;
};

PaddingRecord make_padding_record(int width, int height, int num_scales);

/// Replicates the last row/column once when the original extent is odd; deeper
/// scales are padded inside the networks following the same record.
std::pair<ImageTensor, PaddingRecord> pad_for_scales(const ImageTensor& img, int num_scales);
ImageTensor unpad(const ImageTensor& img, const PaddingRecord& record);

template <typename T>
Tensor<T> image_to_tensor(const ImageTensor& img);
template <typename T>
ImageTensor tensor_to_image(const Tensor<T>& t);

/// Registers g_a, g_s, h_a and h_s parameters under "ga.", "gs.", "ha.", "hs.".
template <typename T>
void add_transform_params(ParamStore<T>& store, const ModelConfig& cfg, std::uint64_t seed);

/// The four transform networks bound to parameters in a store.
template <typename T>
class Transforms {
 public:
  Transforms(const ParamStore<T>& store, const ModelConfig& cfg);

  /// x: [3, H, W] with even H and W -> y: [M, ceil-ladder extents].
  Tensor<T> analysis(const Tensor<T>& x) const;
  /// y: [M, h4, w4] -> [3, padded extents at scale 0], clamped to [-1, 1].
  Tensor<T> synthesis(const Tensor<T>& y, const PaddingRecord& record) const;
  /// y: [M, Hy, Wy] -> z: [N, Hy/4, Wy/4] (ladder rounding).
  Tensor<T> hyper_analysis(const Tensor<T>& y) const;
  /// z -> [2M, hy, wy].
  Tensor<T> hyper_synthesis(const Tensor<T>& z, int hy, int wy) const;

 private:
  int n_;
  int m_;
  std::vector<ConvLayer<T>> ga_;
  std::vector<TConvLayer<T>> gs_;
  std::vector<ConvLayer<T>> ha_;
  std::vector<TConvLayer<T>> hs_up_;
  ConvLayer<T> hs_out_;
};

/// Integer latents [C, H, W].
struct LatentGrid {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<std::int32_t> values;

  LatentGrid() = default;
  LatentGrid(int c, int h, int w);
  std::int32_t& at(int c, int y, int x) {
    return values[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  std::int32_t at(int c, int y, int x) const {
    return values[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  template <typename T>
  Tensor<T> to_tensor() const;
  bool operator==(const LatentGrid&) const = default;
};

enum class QuantMode { kRound, kNoise };

/// Nearest integer, ties away from zero, clamped to +-kLatentClamp.
std::int32_t quantize_value(double v);

/// Round mode: integer grid. Values must be finite.
template <typename T>
LatentGrid quantize_round(const Tensor<T>& v);

/// Round mode yields a constant tensor of rounded values. Noise mode adds
/// U(-1/2, 1/2) drawn from `rng` and passes gradients straight through.
template <typename T>
Tensor<T> quantize(const Tensor<T>& v, QuantMode mode, Rng* rng = nullptr);

}  // namespace jiq
