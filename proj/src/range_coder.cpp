#include "jiq/range_coder.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <numbers>
#include <set>
#include <string>
#include <utility>

#include "jiq/error.hpp"

namespace jiq {

namespace {

constexpr std::uint32_t kTop = 1u << 24;

// Interval [start, end) of a symbol inside the current range.
std::uint32_t scaled(std::uint32_t range, std::uint32_t c, int precision) {
  return static_cast<std::uint32_t>((static_cast<std::uint64_t>(range) * c) >> precision);
}

}  // namespace

double CdfTable::cost_bits(int s) const {
  return static_cast<double>(precision) - std::log2(static_cast<double>(freq(s)));
}

CdfTable build_cdf(std::span<const double> pmf, int precision) {
  if (precision < 1 || precision > 24) throw ConfigError("CDF precision must be in [1, 24]");
  const std::size_t n = pmf.size();
  const std::int64_t total = std::int64_t{1} << precision;
  if (n == 0 || static_cast<std::int64_t>(n) > total) {
    throw ShapeError("cannot give " + std::to_string(n) + " symbols a frequency of at least 1 at precision " +
                     std::to_string(precision));
  }
  double mass = 0.0;
  for (double p : pmf) {
    if (!std::isfinite(p) || p < 0.0) throw NumericError("pmf entries must be finite and non-negative");
    mass += p;
  }
  if (std::abs(mass - 1.0) > 1e-6) throw NumericError("pmf sums to " + std::to_string(mass));

  std::vector<std::int64_t> f(n);
  std::int64_t sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = pmf[i] * static_cast<double>(total);
    f[i] = std::max<std::int64_t>(1, std::llround(x));
    sum += f[i];
  }
  // Cross-entropy is separable and concave in the counts, so settling the sum
  // one count at a time and then exchanging single counts while that helps
  // reaches the optimal table.
  const auto delta = [&](std::size_t i, std::int64_t step) {
    return pmf[i] * std::log1p(static_cast<double>(step) / static_cast<double>(f[i])) / std::numbers::ln2;
  };
  using Key = std::pair<double, std::size_t>;
  const auto better = [](const Key& a, const Key& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; };
  std::set<Key, decltype(better)> gains(better), losses(better);
  std::vector<double> gain(n), loss(n);
  const auto index = [&](std::size_t i) {
    gain[i] = delta(i, 1);
    gains.emplace(gain[i], i);
    if (f[i] > 1) {
      loss[i] = delta(i, -1);
      losses.emplace(loss[i], i);
    }
  };
  const auto bump = [&](std::size_t i, std::int64_t step) {
    gains.erase({gain[i], i});
    if (f[i] > 1) losses.erase({loss[i], i});
    f[i] += step;
    index(i);
  };
  for (std::size_t i = 0; i < n; ++i) index(i);
  for (std::int64_t diff = total - sum; diff != 0; diff += diff > 0 ? -1 : 1) {
    bump(diff > 0 ? gains.begin()->second : losses.begin()->second, diff > 0 ? 1 : -1);
  }
  while (!losses.empty()) {
    std::size_t to = gains.begin()->second, from = losses.begin()->second;
    if (to == from) {
      // Best receiver and donor coincide: pair each with the other's runner-up.
      const auto g2 = std::next(gains.begin());
      const auto l2 = std::next(losses.begin());
      const double via_g2 = g2 == gains.end() ? -1.0 : g2->first + loss[from];
      const double via_l2 = l2 == losses.end() ? -1.0 : gain[to] + l2->first;
      if (via_l2 >= via_g2 && l2 != losses.end()) from = l2->second;
      else if (g2 != gains.end()) to = g2->second;
      else break;
    }
    // Equal-probability pairs trade counts at a rounding-level profit; stop there.
    if (to == from || gain[to] + loss[from] <= 1e-12 * gain[to]) break;
    bump(from, -1);
    bump(to, 1);
  }

  CdfTable t;
  t.precision = precision;
  t.cdf.resize(n + 1);
  t.cdf[0] = 0;
  for (std::size_t i = 0; i < n; ++i) t.cdf[i + 1] = t.cdf[i] + static_cast<std::uint32_t>(f[i]);
  return t;
}

void RangeEncoder::shift_low() {
  if (low_ < 0xFF000000ull || low_ >= (1ull << 32)) {
    const auto carry = static_cast<std::uint8_t>(low_ >> 32);
    std::uint8_t temp = cache_;
    do {
      if (first_) {
        first_ = false;
      } else {
        out_.push_back(static_cast<std::uint8_t>(temp + carry));
      }
      temp = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = static_cast<std::uint8_t>(low_ >> 24);
  }
  ++cache_size_;
  low_ = (low_ & 0x00FFFFFFull) << 8;
}

void RangeEncoder::encode(const CdfTable& table, int symbol) {
  if (symbol < 0 || symbol >= table.symbols()) {
    throw ShapeError("symbol " + std::to_string(symbol) + " outside a " + std::to_string(table.symbols()) +
                     "-symbol table");
  }
  const std::uint32_t start = scaled(range_, table.cdf[symbol], table.precision);
  const std::uint32_t end = scaled(range_, table.cdf[symbol + 1], table.precision);
  low_ += start;
  range_ = end - start;
  while (range_ < kTop) {
    range_ <<= 8;
    shift_low();
  }
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  for (int i = 0; i < 5; ++i) shift_low();
  std::vector<std::uint8_t> out = std::move(out_);
  *this = RangeEncoder();
  return out;
}

RangeDecoder::RangeDecoder(std::span<const std::uint8_t> bytes) : in_(bytes) {
  if (bytes.size() < 4) throw FormatError("range-coded payload shorter than 4 bytes");
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

std::uint8_t RangeDecoder::next_byte() {
  if (pos_ >= in_.size()) throw FormatError("range-coded payload truncated");
  return in_[pos_++];
}

int RangeDecoder::decode(const CdfTable& table) {
  // Largest s with floor(range * c[s] / 2^P) <= code.
  const std::uint64_t v =
      (((static_cast<std::uint64_t>(code_) + 1) << table.precision) - 1) / static_cast<std::uint64_t>(range_);
  auto it = std::upper_bound(table.cdf.begin(), table.cdf.end() - 1, static_cast<std::uint32_t>(v));
  const int s = static_cast<int>(it - table.cdf.begin()) - 1;
  const std::uint32_t start = scaled(range_, table.cdf[s], table.precision);
  const std::uint32_t end = scaled(range_, table.cdf[s + 1], table.precision);
  if (code_ < start || code_ >= end) throw FormatError("range decoder lost synchronization");
  code_ -= start;
  range_ = end - start;
  while (range_ < kTop) {
    range_ <<= 8;
    code_ = (code_ << 8) | next_byte();
  }
  return s;
}

}  // namespace jiq
