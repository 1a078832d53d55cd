#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "jiq/entropy_model.hpp"
#include "jiq/image.hpp"
#include "jiq/model.hpp"
#include "jiq/range_coder.hpp"
#include "jiq/transforms.hpp"

namespace jiq {

// .jiq layout, integers big-endian:
//   "JIQ1" | version u8 | flags u8 | width u16 | height u16 | model_id u8   (11 bytes)
//   z_len u32 | z payload (z_len bytes) | y payload (rest of file)
inline constexpr std::uint8_t kStreamVersion = 1;
inline constexpr std::size_t kHeaderSize = 11;
inline constexpr int kCodecScales = kImageScales + kHyperScales;

struct StreamHeader {
  std::uint8_t version = kStreamVersion;
  ModelFlags flags;
  std::uint16_t width = 0;   // original, unpadded extents
  std::uint16_t height = 0;
  std::uint8_t model_id = 0;

  bool operator==(const StreamHeader&) const = default;
};

std::vector<std::uint8_t> serialize_header(const StreamHeader& h);
/// Throws FormatError on short input, bad magic or unknown version.
StreamHeader parse_header(std::span<const std::uint8_t> bytes);

struct Bitstream {
  StreamHeader header;
  std::vector<std::uint8_t> z_payload;
  std::vector<std::uint8_t> y_payload;

  std::vector<std::uint8_t> serialize() const;
  static Bitstream parse(std::span<const std::uint8_t> bytes);
  std::size_t size_bytes() const { return kHeaderSize + 4 + z_payload.size() + y_payload.size(); }
  bool operator==(const Bitstream&) const = default;
};

/// Total file bits over original pixel count.
double bits_per_pixel(std::size_t bytes, int width, int height);

struct EncodeResult {
  Bitstream stream;
  LatentGrid y;
  LatentGrid z;
  double y_bits_estimate = 0.0;  // -sum log2 of the coding PMF at the coded values
  double z_bits_estimate = 0.0;
  double bpp = 0.0;
};

struct DecodeResult {
  ImageTensor image;
  LatentGrid y;
  LatentGrid z;
};

/// `enhance` sets header bit2; it requires a model with an enhancement network.
/// All other header flags come from the model configuration.
template <typename T>
EncodeResult encode_image(const ImageTensor& x, const Model<T>& model, bool enhance);

/// Header flags must match the model's components (enhancement may be off in
/// the stream even when the model has it). Throws FormatError otherwise.
template <typename T>
DecodeResult decode_image(const Bitstream& stream, const Model<T>& model,
                          std::vector<AccessRecord>* access_log = nullptr);

/// Reconstruction without entropy coding: pad, g_a, round, g_s, optional Q, unpad.
template <typename T>
ImageTensor reconstruct(const ImageTensor& x, const Model<T>& model, bool enhance);

/// Coding tables for one hyper-latent channel and one y latent.
CdfTable z_cdf(double sigma);
CdfTable latent_cdf(const GmmParams& p);

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

}  // namespace jiq
