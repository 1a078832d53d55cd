#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace jiq {

/// Sizes of the GRDN enhancement network.
struct GrdnConfig {
  int num_grdbs = 4;
  int rdbs_per_grdb = 3;
  int convs_per_rdb = 3;
  int kernels_per_conv = 32;

  static GrdnConfig lightweight() { return {4, 3, 3, 32}; }
  static GrdnConfig full() { return {4, 4, 8, 64}; }
  void validate() const;
  bool operator==(const GrdnConfig&) const = default;
};

/// Components that can be excluded for ablations. Bit layout matches the
/// stream header: bit0 global context, bit1 GMM, bit2 enhancement, bit3 MPRM.
struct ModelFlags {
  bool global_context = true;
  bool gmm = true;
  bool enhancement = true;
  bool mprm = true;

  std::uint8_t bits() const;
  static ModelFlags from_bits(std::uint8_t bits);
  std::string describe() const;
  bool operator==(const ModelFlags&) const = default;
};

struct ModelConfig {
  int n = 32;           // transform channels
  int m = 48;           // latent channels
  int g = 3;            // mixture components when GMM is enabled
  int k = 7;            // global-context weight radius
  int min_count = 30;   // causal positions needed before global context is used
  int f_width_mult = 4; // estimator hidden width = f_width_mult * m
  ModelFlags flags;
  GrdnConfig grdn;
  int model_id = 0;     // 0: custom; 1..8: built-in rate points

  int mixtures() const { return flags.gmm ? g : 1; }
  int hyper_channels() const { return n; }
  int f_width() const { return f_width_mult * m; }
  void validate() const;

  /// Serialized into the checkpoint as the "meta.config" tensor.
  std::vector<float> to_meta() const;
  static ModelConfig from_meta(const std::vector<float>& meta);
  bool operator==(const ModelConfig&) const = default;
};

/// Built-in rate points (lambda, N, M, iterations, initial learning rate).
struct RatePoint {
  int model_id;
  double lambda;
  int n;
  int m;
  long iterations;
  double learning_rate;
};

const std::vector<RatePoint>& rate_point_table();
/// Returns nullptr for ids outside the table.
const RatePoint* find_rate_point(int model_id);

}  // namespace jiq
