#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "jiq/checkpoint.hpp"
#include "jiq/enhancement.hpp"
#include "jiq/entropy_model.hpp"
#include "jiq/model_config.hpp"
#include "jiq/transforms.hpp"

namespace jiq {

inline constexpr const char* kConfigEntry = "meta.config";

/// All learned parts of the codec: transforms, entropy model and, when
/// enabled, the enhancement network, over one parameter store.
template <typename T>
class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t seed);
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return *store_; }
  const ParamStore<T>& params() const { return *store_; }

  const Transforms<T>& transforms() const { return *transforms_; }
  const EntropyModel<T>& entropy() const { return *entropy_; }
  bool has_enhancement() const { return enhancer_ != nullptr; }
  const Grdn<T>& enhancer() const;

  /// Parameter tensors whose names start with any of the prefixes.
  std::vector<Tensor<T>> tensors_with_prefix(const std::vector<std::string>& prefixes) const;

  std::vector<CheckpointEntry> to_checkpoint() const;
  static Model from_checkpoint(const std::vector<CheckpointEntry>& entries);
  void save(const std::filesystem::path& path) const { write_checkpoint(path, to_checkpoint()); }
  static Model load(const std::filesystem::path& path) { return from_checkpoint(read_checkpoint(path)); }

  /// Deep copy through the checkpoint representation (32-bit values).
  template <typename U>
  Model<U> cast() const;

 private:
  void bind();

  ModelConfig cfg_;
  std::unique_ptr<ParamStore<T>> store_;
  std::unique_ptr<Transforms<T>> transforms_;
  std::unique_ptr<EntropyModel<T>> entropy_;
  std::unique_ptr<Grdn<T>> enhancer_;
};

}  // namespace jiq
