#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "jiq/tensor.hpp"

namespace jiq {

/// One named tensor as stored on disk (always 32-bit floats).
struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<float> values;

  bool operator==(const CheckpointEntry&) const = default;
};

// Layout: "JIQW", version u8, count u32, then per tensor: name length u16,
// name bytes, rank u8, extents u32 each, little-endian f32 values. All
// integers little-endian.
inline constexpr std::uint8_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const std::vector<CheckpointEntry>& entries);
std::vector<CheckpointEntry> decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void write_checkpoint(const std::filesystem::path& path, const std::vector<CheckpointEntry>& entries);
std::vector<CheckpointEntry> read_checkpoint(const std::filesystem::path& path);

/// Name-ordered collection of trainable tensors.
template <typename T>
class ParamStore {
 public:
  Tensor<T>& add(const std::string& name, Shape shape, std::vector<T> values);
  const Tensor<T>& get(const std::string& name) const;
  Tensor<T>& get(const std::string& name);
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  std::vector<std::string> names() const;
  std::vector<Tensor<T>> tensors() const;
  const std::map<std::string, Tensor<T>>& items() const { return params_; }

  void zero_grad();

  std::vector<CheckpointEntry> to_entries() const;
  /// Overwrites values of existing tensors; names and shapes must match exactly.
  void load_entries(const std::vector<CheckpointEntry>& entries);

 private:
  std::map<std::string, Tensor<T>> params_;
};

}  // namespace jiq
