#include "jiq/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "jiq/error.hpp"

namespace jiq {

namespace {

constexpr char kMagic[4] = {'J', 'I', 'Q', 'W'};

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}

  template <typename U>
  U get_le() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(U);
    return v;
  }
  std::string get_string(std::size_t n) {
    need(n);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw FormatError("checkpoint truncated");
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const std::vector<CheckpointEntry>& entries) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.push_back(kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    if (e.name.size() > 0xFFFF) throw FormatError("tensor name too long: " + e.name);
    if (e.shape.size() > 0xFF) throw FormatError("tensor rank too large: " + e.name);
    if (numel(e.shape) != e.values.size()) throw ShapeError("checkpoint entry " + e.name + " has inconsistent shape");
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    out.push_back(static_cast<std::uint8_t>(e.shape.size()));
    for (int d : e.shape) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (float f : e.values) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

std::vector<CheckpointEntry> decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (r.get_string(4) != std::string(kMagic, 4)) throw FormatError("not a checkpoint (bad magic)");
  auto version = r.get_le<std::uint8_t>();
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  auto count = r.get_le<std::uint32_t>();
  std::vector<CheckpointEntry> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    e.name = r.get_string(r.get_le<std::uint16_t>());
    auto rank = r.get_le<std::uint8_t>();
    for (int d = 0; d < rank; ++d) e.shape.push_back(static_cast<int>(r.get_le<std::uint32_t>()));
    std::size_t n = numel(e.shape);
    e.values.resize(n);
    for (std::size_t k = 0; k < n; ++k) e.values[k] = std::bit_cast<float>(r.get_le<std::uint32_t>());
    entries.push_back(std::move(e));
  }
  if (!r.done()) throw FormatError("trailing bytes after checkpoint payload");
  return entries;
}

void write_checkpoint(const std::filesystem::path& path, const std::vector<CheckpointEntry>& entries) {
  auto bytes = encode_checkpoint(entries);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw FormatError("failed writing " + path.string());
}

std::vector<CheckpointEntry> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

template <typename T>
Tensor<T>& ParamStore<T>::add(const std::string& name, Shape shape, std::vector<T> values) {
  if (contains(name)) throw ShapeError("duplicate parameter " + name);
  auto [it, ok] = params_.emplace(name, Tensor<T>::parameter(std::move(shape), std::move(values)));
  return it->second;
}

template <typename T>
const Tensor<T>& ParamStore<T>::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ShapeError("unknown parameter " + name);
  return it->second;
}

template <typename T>
Tensor<T>& ParamStore<T>::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ShapeError("unknown parameter " + name);
  return it->second;
}

template <typename T>
std::size_t ParamStore<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [k, v] : params_) n += v.size();
  return n;
}

template <typename T>
std::vector<std::string> ParamStore<T>::names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : params_) out.push_back(k);
  return out;
}

template <typename T>
std::vector<Tensor<T>> ParamStore<T>::tensors() const {
  std::vector<Tensor<T>> out;
  for (const auto& [k, v] : params_) out.push_back(v);
  return out;
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto& [k, v] : params_) v.zero_grad();
}

template <typename T>
std::vector<CheckpointEntry> ParamStore<T>::to_entries() const {
  std::vector<CheckpointEntry> out;
  for (const auto& [k, v] : params_) {
    out.push_back({k, v.shape(), std::vector<float>(v.values().begin(), v.values().end())});
  }
  return out;
}

template <typename T>
void ParamStore<T>::load_entries(const std::vector<CheckpointEntry>& entries) {
  std::size_t matched = 0;
  for (const auto& e : entries) {
    auto it = params_.find(e.name);
    if (it == params_.end()) throw FormatError("checkpoint tensor " + e.name + " not present in model");
    if (it->second.shape() != e.shape) {
      throw FormatError("checkpoint tensor " + e.name + " has shape " + shape_str(e.shape) +
                        ", model expects " + shape_str(it->second.shape()));
    }
    auto dst = it->second.mutable_values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(e.values[i]);
    ++matched;
  }
  if (matched != params_.size()) {
    throw FormatError("checkpoint provides " + std::to_string(matched) + " of " +
                      std::to_string(params_.size()) + " model tensors");
  }
}

template class ParamStore<float>;
template class ParamStore<double>;

}  // namespace jiq
