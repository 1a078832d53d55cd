#include "jiq/model_config.hpp"

#include <cmath>

#include "jiq/error.hpp"

namespace jiq {

void GrdnConfig::validate() const {
  if (num_grdbs < 1 || rdbs_per_grdb < 1 || convs_per_rdb < 1 || kernels_per_conv < 1) {
    throw ConfigError("GRDN sizes must all be >= 1");
  }
}

std::uint8_t ModelFlags::bits() const {
  return static_cast<std::uint8_t>((global_context ? 1 : 0) | (gmm ? 2 : 0) | (enhancement ? 4 : 0) |
                                   (mprm ? 8 : 0));
}

ModelFlags ModelFlags::from_bits(std::uint8_t bits) {
  if (bits & 0xF0) throw FormatError("reserved flag bits set: " + std::to_string(bits));
  return {(bits & 1) != 0, (bits & 2) != 0, (bits & 4) != 0, (bits & 8) != 0};
}

std::string ModelFlags::describe() const {
  std::string s;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!s.empty()) s += ',';
    s += name;
  };
  add(global_context, "gc");
  add(gmm, "gmm");
  add(enhancement, "enhance");
  add(mprm, "mprm");
  return s.empty() ? "none" : s;
}

void ModelConfig::validate() const {
  if (n < 1 || m < 1) throw ConfigError("n and m must be positive");
  if (g < 1) throw ConfigError("g must be positive");
  if (k < 0) throw ConfigError("k must be non-negative");
  if (min_count < 1) throw ConfigError("min_count must be positive");
  if (f_width_mult < 1) throw ConfigError("f_width_mult must be positive");
  if (flags.global_context && !flags.mprm) {
    throw ConfigError("global context is refined by MPRM; disabling MPRM requires disabling global context");
  }
  if (model_id < 0 || model_id > 255) throw ConfigError("model_id must fit in one byte");
  if (const RatePoint* rp = find_rate_point(model_id); rp && (rp->n != n || rp->m != m)) {
    throw ConfigError("model_id " + std::to_string(model_id) + " requires n=" + std::to_string(rp->n) +
                      ", m=" + std::to_string(rp->m));
  }
  grdn.validate();
}

std::vector<float> ModelConfig::to_meta() const {
  return {1.0f,  // layout version
          static_cast<float>(n), static_cast<float>(m), static_cast<float>(g), static_cast<float>(k),
          static_cast<float>(min_count), static_cast<float>(f_width_mult),
          static_cast<float>(flags.bits()), static_cast<float>(grdn.num_grdbs),
          static_cast<float>(grdn.rdbs_per_grdb), static_cast<float>(grdn.convs_per_rdb),
          static_cast<float>(grdn.kernels_per_conv), static_cast<float>(model_id)};
}

ModelConfig ModelConfig::from_meta(const std::vector<float>& meta) {
  if (meta.size() != 13 || meta[0] != 1.0f) throw FormatError("unrecognized model metadata");
  auto i = [&](std::size_t k) {
    float v = meta[k];
    if (v != std::floor(v) || v < 0.0f || v > 1e6f) throw FormatError("corrupt model metadata");
    return static_cast<int>(v);
  };
  ModelConfig c;
  c.n = i(1);
  c.m = i(2);
  c.g = i(3);
  c.k = i(4);
  c.min_count = i(5);
  c.f_width_mult = i(6);
  c.flags = ModelFlags::from_bits(static_cast<std::uint8_t>(i(7)));
  c.grdn = {i(8), i(9), i(10), i(11)};
  c.model_id = i(12);
  return c;
}

const std::vector<RatePoint>& rate_point_table() {
  static const std::vector<RatePoint> table{
      {1, 0.5, 128, 128, 1'200'000, 1e-4},   {2, 0.35, 128, 128, 1'200'000, 1e-4},
      {3, 0.23, 128, 192, 1'500'000, 1e-4},  {4, 0.12, 192, 256, 1'500'000, 1e-4},
      {5, 0.06, 192, 420, 2'000'000, 5e-5},  {6, 0.03, 192, 420, 2'000'000, 5e-5},
      {7, 0.017, 256, 600, 3'000'000, 5e-5}, {8, 0.01, 256, 600, 3'000'000, 3e-5},
  };
  return table;
}

const RatePoint* find_rate_point(int model_id) {
  for (const auto& rp : rate_point_table()) {
    if (rp.model_id == model_id) return &rp;
  }
  return nullptr;
}

}  // namespace jiq
