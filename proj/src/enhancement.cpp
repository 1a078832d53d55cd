#include "jiq/enhancement.hpp"

#include "jiq/error.hpp"
#include "jiq/ops.hpp"

namespace jiq {

std::string rdb_prefix(int grdb, int index) {
  return "q.grdb" + std::to_string(grdb) + ".rdb" + std::to_string(index);
}

template <typename T>
void add_grdn_params(ParamStore<T>& store, const GrdnConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  // Residual branches end in zero-initialized fusions so every block starts as
  // the identity; He-initialized fusions compound the feature scale per block.
  const int c = cfg.kernels_per_conv;
  add_conv_params(store, "q.head", c, 3, 3, 3, seed);
  for (int g = 0; g < cfg.num_grdbs; ++g) {
    for (int r = 0; r < cfg.rdbs_per_grdb; ++r) {
      const std::string p = rdb_prefix(g, r);
      for (int k = 0; k < cfg.convs_per_rdb; ++k) {
        add_conv_params(store, p + ".conv" + std::to_string(k), c, c * (k + 1), 3, 3, seed);
      }
      add_conv_params(store, p + ".fuse", c, c * (cfg.convs_per_rdb + 1), 1, 1, seed, Init::kZero);
    }
    add_conv_params(store, "q.grdb" + std::to_string(g) + ".fuse", c, c * cfg.rdbs_per_grdb, 1, 1, seed, Init::kZero);
  }
  add_conv_params(store, "q.tail", 3, c, 3, 3, seed, Init::kZero);
}

template <typename T>
Grdn<T>::Grdn(const ParamStore<T>& store, const GrdnConfig& cfg) : cfg_(cfg) {
  head_ = ConvLayer<T>::bind(store, "q.head");
  for (int g = 0; g < cfg.num_grdbs; ++g) {
    Grdb group;
    for (int r = 0; r < cfg.rdbs_per_grdb; ++r) {
      const std::string p = rdb_prefix(g, r);
      Rdb block;
      for (int k = 0; k < cfg.convs_per_rdb; ++k) {
        block.convs.push_back(ConvLayer<T>::bind(store, p + ".conv" + std::to_string(k)));
      }
      block.fuse = ConvLayer<T>::bind(store, p + ".fuse");
      group.rdbs.push_back(std::move(block));
    }
    group.fuse = ConvLayer<T>::bind(store, "q.grdb" + std::to_string(g) + ".fuse");
    groups_.push_back(std::move(group));
  }
  tail_ = ConvLayer<T>::bind(store, "q.tail");
}

template <typename T>
Tensor<T> Grdn<T>::rdb(const Tensor<T>& x, int grdb, int index) const {
  if (x.rank() != 3 || x.dim(0) != cfg_.kernels_per_conv) {
    throw ShapeError("RDB input must have " + std::to_string(cfg_.kernels_per_conv) + " channels, got " +
                     shape_str(x.shape()));
  }
  const Rdb& block = groups_.at(grdb).rdbs.at(index);
  std::vector<Tensor<T>> features{x};
  for (const auto& conv : block.convs) features.push_back(lrelu(conv(concat(features))));
  return add(x, block.fuse(concat(features)));
}

template <typename T>
Tensor<T> Grdn<T>::forward(const Tensor<T>& x) const {
  if (x.rank() != 3 || x.dim(0) != 3) throw ShapeError("GRDN expects [3,H,W], got " + shape_str(x.shape()));
  Tensor<T> h = head_(x);
  for (int g = 0; g < cfg_.num_grdbs; ++g) {
    std::vector<Tensor<T>> outs;
    Tensor<T> cur = h;
    for (int r = 0; r < cfg_.rdbs_per_grdb; ++r) {
      cur = rdb(cur, g, r);
      outs.push_back(cur);
    }
    h = add(h, groups_[g].fuse(concat(outs)));
  }
  return clamp(add(x, tail_(h)), T(-1), T(1));
}

template void add_grdn_params<float>(ParamStore<float>&, const GrdnConfig&, std::uint64_t);
template void add_grdn_params<double>(ParamStore<double>&, const GrdnConfig&, std::uint64_t);
template class Grdn<float>;
template class Grdn<double>;

}  // namespace jiq
