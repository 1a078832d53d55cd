#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace jiq {

inline constexpr int kDefaultPrecision = 16;

/// Cumulative frequencies c[0..S] with c[0] = 0, c[S] = 2^precision and every
/// symbol holding frequency >= 1.
struct CdfTable {
  int precision = kDefaultPrecision;
  std::vector<std::uint32_t> cdf;

  int symbols() const { return static_cast<int>(cdf.size()) - 1; }
  std::uint32_t freq(int s) const { return cdf[s + 1] - cdf[s]; }
  /// -log2 of the quantized probability of s.
  double cost_bits(int s) const;
  bool operator==(const CdfTable&) const = default;
};

/// Frequencies max(1, round(p * 2^P)); the total is then corrected to exactly
/// 2^P by adding to the largest rounding remainders (ties to the lower index)
/// or removing from the smallest among symbols above 1.
CdfTable build_cdf(std::span<const double> pmf, int precision = kDefaultPrecision);

/// Carry-propagating byte-wise range encoder (33-bit low, 32-bit range).
class RangeEncoder {
 public:
  void encode(const CdfTable& table, int symbol);
  /// Appends the termination bytes and returns the stream; the encoder is
  /// left empty afterwards.
  std::vector<std::uint8_t> finish();
  std::size_t bytes_so_far() const { return out_.size(); }

 private:
  void shift_low();

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
  bool first_ = true;  // the first shifted byte is always zero and is not stored
  std::vector<std::uint8_t> out_;
};

class RangeDecoder {
 public:
  /// Throws FormatError when fewer than 4 bytes are available.
  explicit RangeDecoder(std::span<const std::uint8_t> bytes);
  /// Throws FormatError when the stream runs out of bytes.
  int decode(const CdfTable& table);
  std::size_t bytes_consumed() const { return pos_; }

 private:
  std::uint8_t next_byte();

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint32_t code_ = 0;
};

}  // namespace jiq
