#include "jiq/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "jiq/error.hpp"
#include "jiq/rng.hpp"

namespace jiq {

double GradCheckReport::worst() const {
  double w = 0.0;
  for (const auto& e : entries) w = std::max(w, e.max_rel_error);
  return w;
}

double GradCheckReport::normwise_error() const {
  double diff = 0.0, mag = 0.0;
  for (const auto& e : entries) {
    diff = std::max(diff, e.max_abs_error);
    mag = std::max(mag, e.max_magnitude);
  }
  return mag > 1e-12 ? diff / mag : diff;
}

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  for (const auto& e : entries) os << e.name << ": " << e.max_rel_error << " (" << e.checked << ")\n";
  return os.str();
}

GradCheckReport grad_check(const std::function<Tensor<double>()>& fn,
                           const std::vector<NamedTensor>& params, double h, double tolerance,
                           std::size_t max_entries_per_tensor, std::uint64_t seed) {
  for (const auto& [name, t] : params) t.node()->grad.clear();
  Tensor<double> loss = fn();
  std::vector<Tensor<double>> tensors;
  for (const auto& p : params) tensors.push_back(p.second);
  backward(loss, std::span<const Tensor<double>>(tensors));

  GradCheckReport report;
  report.tolerance = tolerance;
  Rng rng(seed);
  NoGradGuard no_grad;
  for (const auto& [name, t] : params) {
    Tensor<double> param = t;
    std::vector<double> analytic(param.grad().begin(), param.grad().end());
    check_finite(std::span<const double>(analytic), "analytic gradient");

    std::vector<std::size_t> idx(param.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (max_entries_per_tensor > 0 && idx.size() > max_entries_per_tensor) {
      for (std::size_t i = 0; i < max_entries_per_tensor; ++i) {
        std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
      }
      idx.resize(max_entries_per_tensor);
    }

    double max_diff = 0.0, max_mag = 0.0;
    auto vals = param.mutable_values();
    for (std::size_t i : idx) {
      const double orig = vals[i];
      vals[i] = orig + h;
      const double fp = fn().item();
      vals[i] = orig - h;
      const double fm = fn().item();
      vals[i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      if (!std::isfinite(numeric)) throw NumericError("non-finite finite difference for " + name);
      max_diff = std::max(max_diff, std::abs(numeric - analytic[i]));
      max_mag = std::max({max_mag, std::abs(numeric), std::abs(analytic[i])});
    }
    GradCheckEntry e{name, 0.0, idx.size(), max_diff, max_mag};
    if (max_mag > 1e-12) e.max_rel_error = max_diff / max_mag;
    else e.max_rel_error = max_diff;
    report.entries.push_back(e);
  }
  return report;
}

}  // namespace jiq
