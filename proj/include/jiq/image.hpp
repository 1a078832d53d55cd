#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace jiq {

/// 8-bit RGB raster, interleaved, row-major.
struct Rgb8Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // width * height * 3

  bool operator==(const Rgb8Image&) const = default;
};

/// Planar 3-channel image with values in [-1, 1], stored [3, H, W].
struct ImageTensor {
  int width = 0;
  int height = 0;
  std::vector<float> values;

  ImageTensor() = default;
  ImageTensor(int w, int h);
  float& at(int c, int y, int x) { return values[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  float at(int c, int y, int x) const {
    return values[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  bool operator==(const ImageTensor&) const = default;
};

/// v / 127.5 - 1.
ImageTensor to_tensor(const Rgb8Image& img);
/// Inverse mapping, clamped to [0, 255] and rounded half away from zero.
Rgb8Image to_rgb8(const ImageTensor& img);
std::uint8_t to_pixel(double normalized);

/// Reads PNG or binary PPM (P6), chosen by file signature.
Rgb8Image read_image(const std::filesystem::path& path);
/// Writes PPM when the extension is .ppm, PNG otherwise.
void write_image(const std::filesystem::path& path, const Rgb8Image& img);
void write_png(const std::filesystem::path& path, const Rgb8Image& img);
void write_ppm(const std::filesystem::path& path, const Rgb8Image& img);

/// Sorted list of .png/.ppm files directly inside `dir`.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

}  // namespace jiq
