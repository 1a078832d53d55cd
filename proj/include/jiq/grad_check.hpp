#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "jiq/tensor.hpp"

namespace jiq {

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  double max_abs_error = 0.0;
  double max_magnitude = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 0.0;

  double worst() const;
  bool passed() const { return worst() < tolerance; }
  /// Largest deviation over all checked entries divided by the largest
  /// gradient magnitude among them: the relative error of the whole vector.
  double normwise_error() const;
  std::string summary() const;
};

using NamedTensor = std::pair<std::string, Tensor<double>>;

/// Compares reverse-mode gradients of the scalar `fn` with central finite
/// differences. Per tensor, the error is max_i |g_i - fd_i| divided by the
/// largest |g_i| or |fd_i| among the checked entries. With
/// max_entries_per_tensor > 0 a seeded random subset of entries is checked.
GradCheckReport grad_check(const std::function<Tensor<double>()>& fn,
                           const std::vector<NamedTensor>& params, double h = 1e-4,
                           double tolerance = 1e-5, std::size_t max_entries_per_tensor = 0,
                           std::uint64_t seed = 0);

}  // namespace jiq
