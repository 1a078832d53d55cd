#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jiq/checkpoint.hpp"
#include "jiq/layers.hpp"
#include "jiq/model_config.hpp"

namespace jiq {

// GRDN quality-enhancement network:
//   head 3x3 conv (3 -> C)
//   GRDB x num_grdbs: RDB chain, 1x1 fusion of the RDB outputs, additive skip
//   tail 3x3 conv (C -> 3, zero-initialized), global skip from the input, clamp to [-1, 1]
// An RDB runs convs_per_rdb 3x3 convs, each over the concatenation of the
// block input and all earlier conv outputs, then a 1x1 fusion and a local skip.

template <typename T>
void add_grdn_params(ParamStore<T>& store, const GrdnConfig& cfg, std::uint64_t seed);

template <typename T>
class Grdn {
 public:
  Grdn(const ParamStore<T>& store, const GrdnConfig& cfg);

  /// x: [3, H, W] in [-1, 1] -> same shape.
  Tensor<T> forward(const Tensor<T>& x) const;
  /// One residual dense block; x has C channels.
  Tensor<T> rdb(const Tensor<T>& x, int grdb, int index) const;

 private:
  struct Rdb {
    std::vector<ConvLayer<T>> convs;
    ConvLayer<T> fuse;
  };
  struct Grdb {
    std::vector<Rdb> rdbs;
    ConvLayer<T> fuse;
  };

  GrdnConfig cfg_;
  ConvLayer<T> head_;
  std::vector<Grdb> groups_;
  ConvLayer<T> tail_;
};

std::string rdb_prefix(int grdb, int index);

}  // namespace jiq
