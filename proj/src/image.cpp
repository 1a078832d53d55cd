#include "jiq/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

#include "jiq/error.hpp"

namespace jiq {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw FormatError("cannot open " + path.string());
  return f;
}

void check_extents(int w, int h, const std::filesystem::path& path) {
  if (w < 1 || h < 1 || w > 65535 || h > 65535) {
    throw FormatError(path.string() + ": unsupported extents " + std::to_string(w) + "x" + std::to_string(h));
  }
}

Rgb8Image read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw FormatError(path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  Rgb8Image out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  try {
    check_extents(out.width, out.height, path);
  } catch (...) {
    png_image_free(&image);
    throw;
  }
  out.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw FormatError(path.string() + ": " + msg);
  }
  return out;
}

// Skips whitespace and '#' comments, then reads a decimal integer.
int read_ppm_int(std::FILE* f, const std::filesystem::path& path) {
  int c = std::fgetc(f);
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = std::fgetc(f);
    } else if (!std::isspace(c)) {
      break;
    }
    c = std::fgetc(f);
  }
  if (c == EOF || !std::isdigit(c)) throw FormatError(path.string() + ": malformed PPM header");
  long v = 0;
  while (c != EOF && std::isdigit(c)) {
    v = v * 10 + (c - '0');
    if (v > 1'000'000) throw FormatError(path.string() + ": PPM value out of range");
    c = std::fgetc(f);
  }
  return static_cast<int>(v);  // the single whitespace after the value is consumed
}

Rgb8Image read_ppm(const std::filesystem::path& path) {
  auto f = open_file(path, "rb");
  char magic[2];
  if (std::fread(magic, 1, 2, f.get()) != 2 || magic[0] != 'P' || magic[1] != '6') {
    throw FormatError(path.string() + ": not a binary PPM");
  }
  Rgb8Image out;
  out.width = read_ppm_int(f.get(), path);
  out.height = read_ppm_int(f.get(), path);
  int maxval = read_ppm_int(f.get(), path);
  check_extents(out.width, out.height, path);
  if (maxval != 255) throw FormatError(path.string() + ": only 8-bit PPM is supported");
  out.pixels.resize(static_cast<std::size_t>(out.width) * out.height * 3);
  if (std::fread(out.pixels.data(), 1, out.pixels.size(), f.get()) != out.pixels.size()) {
    throw FormatError(path.string() + ": truncated PPM data");
  }
  return out;
}

}  // namespace

ImageTensor::ImageTensor(int w, int h)
    : width(w), height(h), values(static_cast<std::size_t>(w) * h * 3, 0.0f) {}

ImageTensor to_tensor(const Rgb8Image& img) {
  ImageTensor t(img.width, img.height);
  const std::size_t plane = static_cast<std::size_t>(img.width) * img.height;
  for (std::size_t i = 0; i < plane; ++i) {
    for (int c = 0; c < 3; ++c) {
      t.values[c * plane + i] = static_cast<float>(img.pixels[i * 3 + c] / 127.5 - 1.0);
    }
  }
  return t;
}

std::uint8_t to_pixel(double normalized) {
  double v = std::clamp((normalized + 1.0) * 127.5, 0.0, 255.0);
  return static_cast<std::uint8_t>(std::floor(v + 0.5));  // v >= 0, so this is half away from zero
}

Rgb8Image to_rgb8(const ImageTensor& img) {
  Rgb8Image out{img.width, img.height, {}};
  const std::size_t plane = static_cast<std::size_t>(img.width) * img.height;
  out.pixels.resize(plane * 3);
  for (std::size_t i = 0; i < plane; ++i) {
    for (int c = 0; c < 3; ++c) out.pixels[i * 3 + c] = to_pixel(img.values[c * plane + i]);
  }
  return out;
}

Rgb8Image read_image(const std::filesystem::path& path) {
  auto f = open_file(path, "rb");
  unsigned char sig[8] = {};
  std::size_t n = std::fread(sig, 1, 8, f.get());
  f.reset();
  if (n == 8 && png_sig_cmp(sig, 0, 8) == 0) return read_png(path);
  if (n >= 2 && sig[0] == 'P' && sig[1] == '6') return read_ppm(path);
  throw FormatError(path.string() + ": unrecognized image format");
}

void write_png(const std::filesystem::path& path, const Rgb8Image& img) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.pixels.data(), 0, nullptr)) {
    throw FormatError(path.string() + ": " + image.message);
  }
}

void write_ppm(const std::filesystem::path& path, const Rgb8Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw FormatError("write failed: " + path.string());
}

void write_image(const std::filesystem::path& path, const Rgb8Image& img) {
  if (path.extension() == ".ppm") {
    write_ppm(path, img);
  } else {
    write_png(path, img);
  }
}

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw FormatError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".ppm") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace jiq
