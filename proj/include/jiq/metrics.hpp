#pragma once

#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "jiq/image.hpp"
#include "jiq/model.hpp"
#include "jiq/tensor.hpp"

namespace jiq {

/// Returned by psnr() for identical images.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// 10 log10(255^2 / MSE) over all channels on the 8-bit scale.
double psnr(const Rgb8Image& a, const Rgb8Image& b);
double psnr(const ImageTensor& a, const ImageTensor& b);

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;
inline constexpr double kMsSsimWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

/// min(5, floor(log2(min_extent / 8))); throws ShapeError below 16 pixels.
int ms_ssim_scales(int width, int height);

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
std::vector<double> ssim_taps();

/// Separable Gaussian filter without padding: [C,H,W] -> [C,H-10,W-10].
template <typename T>
Tensor<T> gaussian_filter_valid(const Tensor<T>& x);

/// MS-SSIM of two [3,H,W] images on the 0..255 scale, computed per channel and
/// averaged. Contrast-structure terms below zero are clamped to zero before
/// exponentiation. Differentiable.
template <typename T>
Tensor<T> ms_ssim(const Tensor<T>& a, const Tensor<T>& b);
double ms_ssim(const Rgb8Image& a, const Rgb8Image& b);
double ms_ssim(const ImageTensor& a, const ImageTensor& b);

/// -10 log10(1 - v).
double msssim_db(double v);

struct RdSample {
  double rate;
  double quality;
};

/// Bjontegaard delta rate in percent (negative: test needs fewer bits).
/// log10(rate) is interpolated as a PCHIP function of quality on each curve
/// and integrated over the common quality interval. Each curve needs at least
/// four points with quality strictly increasing in rate; violations and
/// curves without overlap throw FormatError.
double bd_rate(std::vector<RdSample> anchor, std::vector<RdSample> test);

struct RdRow {
  std::string image;
  double bpp = 0.0;
  double psnr_db = 0.0;
  double msssim = 0.0;
  double msssim_db = 0.0;
};

inline constexpr const char* kAverageRow = "average";

/// Arithmetic mean of every column, labelled kAverageRow.
RdRow average_row(const std::vector<RdRow>& rows);

/// Codes every image in `dir` through the full bitstream path. Returns one row
/// per image in file-name order followed by the average row.
template <typename T>
std::vector<RdRow> rd_eval(const Model<T>& model, const std::filesystem::path& dir, bool enhance);

/// Header `image,bpp,psnr_db,msssim,msssim_db`. With `append`, rows are added
/// to an existing file and the header is written only for a new file.
void write_rd_csv(const std::filesystem::path& path, const std::vector<RdRow>& rows, bool append = false);
std::vector<RdRow> read_rd_csv(const std::filesystem::path& path);

enum class QualityMetric { kPsnr, kMsssimDb };

/// RD points of a CSV: its average rows when there are at least four of them
/// (a curve assembled from several eval runs), otherwise every per-image row.
std::vector<RdSample> rd_curve(const std::vector<RdRow>& rows, QualityMetric metric);

}  // namespace jiq
