#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace jiq {

/// Mixes a run seed with a stream name so each parameter tensor or noise
/// source gets an independent, architecture-independent stream.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);

/// mt19937_64 with hand-rolled conversions; the engine's output sequence is
/// fixed by the standard, the conversions below fix the rest.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller.
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace jiq
