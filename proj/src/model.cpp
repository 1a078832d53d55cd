#include "jiq/model.hpp"

#include "jiq/error.hpp"

namespace jiq {

template <typename T>
Model<T>::Model(const ModelConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), store_(std::make_unique<ParamStore<T>>()) {
  cfg_.validate();
  add_transform_params(*store_, cfg_, seed);
  add_entropy_params(*store_, cfg_, seed);
  if (cfg_.flags.enhancement) add_grdn_params(*store_, cfg_.grdn, seed);
  bind();
}

template <typename T>
void Model<T>::bind() {
  transforms_ = std::make_unique<Transforms<T>>(*store_, cfg_);
  entropy_ = std::make_unique<EntropyModel<T>>(*store_, cfg_);
  enhancer_ = cfg_.flags.enhancement ? std::make_unique<Grdn<T>>(*store_, cfg_.grdn) : nullptr;
}

template <typename T>
const Grdn<T>& Model<T>::enhancer() const {
  if (!enhancer_) throw ConfigError("model has no enhancement network");
  return *enhancer_;
}

template <typename T>
std::vector<Tensor<T>> Model<T>::tensors_with_prefix(const std::vector<std::string>& prefixes) const {
  std::vector<Tensor<T>> out;
  for (const auto& [name, t] : store_->items()) {
    for (const auto& p : prefixes) {
      if (name.rfind(p, 0) == 0) {
        out.push_back(t);
        break;
      }
    }
  }
  return out;
}

template <typename T>
std::vector<CheckpointEntry> Model<T>::to_checkpoint() const {
  auto entries = store_->to_entries();
  auto meta = cfg_.to_meta();
  entries.insert(entries.begin(), CheckpointEntry{kConfigEntry, {static_cast<int>(meta.size())}, meta});
  return entries;
}

template <typename T>
Model<T> Model<T>::from_checkpoint(const std::vector<CheckpointEntry>& entries) {
  std::vector<CheckpointEntry> rest;
  const CheckpointEntry* meta = nullptr;
  for (const auto& e : entries) {
    if (e.name == kConfigEntry) {
      meta = &e;
    } else {
      rest.push_back(e);
    }
  }
  if (!meta) throw FormatError("checkpoint has no model configuration entry");
  ModelConfig cfg = ModelConfig::from_meta(meta->values);
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint configuration is invalid: ") + e.what());
  }
  Model m(cfg, 0);
  m.store_->load_entries(rest);
  return m;
}

template <typename T>
template <typename U>
Model<U> Model<T>::cast() const {
  return Model<U>::from_checkpoint(to_checkpoint());
}

template class Model<float>;
template class Model<double>;
template Model<double> Model<float>::cast<double>() const;
template Model<float> Model<double>::cast<float>() const;
template Model<float> Model<float>::cast<float>() const;
template Model<double> Model<double>::cast<double>() const;

}  // namespace jiq
