#include "jiq/codec.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "jiq/error.hpp"
#include "jiq/ops.hpp"

namespace jiq {

namespace {

constexpr std::uint8_t kMagic[4] = {'J', 'I', 'Q', '1'};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

std::uint32_t get_be(std::span<const std::uint8_t> b, std::size_t at, int bytes) {
  std::uint32_t v = 0;
  for (int i = 0; i < bytes; ++i) v = (v << 8) | b[at + i];
  return v;
}

void check_stream_matches(const StreamHeader& h, const ModelConfig& cfg) {
  const ModelFlags& f = h.flags;
  const ModelFlags& m = cfg.flags;
  if (f.global_context != m.global_context || f.gmm != m.gmm || f.mprm != m.mprm) {
    throw FormatError("stream flags [" + f.describe() + "] do not match the checkpoint [" + m.describe() + "]");
  }
  if (f.enhancement && !m.enhancement) throw FormatError("stream requests enhancement; checkpoint has none");
  if (h.model_id != cfg.model_id) {
    throw FormatError("stream model_id " + std::to_string(h.model_id) + " does not match the checkpoint's " +
                      std::to_string(cfg.model_id));
  }
}

template <typename T>
std::vector<double> raster_double(const Tensor<T>& t) {
  return {t.values().begin(), t.values().end()};
}

// Latent extents of the codec ladder for an image.
struct LatentExtents {
  PaddingRecord record;
  int hy, wy, hz, wz;
};

LatentExtents latent_extents(int width, int height) {
  LatentExtents e{make_padding_record(width, height, kCodecScales), 0, 0, 0, 0};
  e.hy = e.record.height_at(kImageScales);
  e.wy = e.record.width_at(kImageScales);
  e.hz = e.record.height_at(kCodecScales);
  e.wz = e.record.width_at(kCodecScales);
  return e;
}

// Ideal code length of a symbol once the table floor of one count applies.
double coded_bits(double p) { return -std::log2(std::max(p, std::ldexp(1.0, -kDefaultPrecision))); }

}  // namespace

std::vector<std::uint8_t> serialize_header(const StreamHeader& h) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.push_back(h.version);
  out.push_back(h.flags.bits());
  put_u16(out, h.width);
  put_u16(out, h.height);
  out.push_back(h.model_id);
  return out;
}

StreamHeader parse_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) throw FormatError("stream shorter than the header");
  if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) throw FormatError("bad magic");
  StreamHeader h;
  h.version = bytes[4];
  if (h.version != kStreamVersion) throw FormatError("unsupported stream version " + std::to_string(h.version));
  h.flags = ModelFlags::from_bits(bytes[5]);
  h.width = static_cast<std::uint16_t>(get_be(bytes, 6, 2));
  h.height = static_cast<std::uint16_t>(get_be(bytes, 8, 2));
  h.model_id = bytes[10];
  if (h.width == 0 || h.height == 0) throw FormatError("stream has an empty image");
  return h;
}

std::vector<std::uint8_t> Bitstream::serialize() const {
  auto out = serialize_header(header);
  put_u32(out, static_cast<std::uint32_t>(z_payload.size()));
  out.insert(out.end(), z_payload.begin(), z_payload.end());
  out.insert(out.end(), y_payload.begin(), y_payload.end());
  return out;
}

Bitstream Bitstream::parse(std::span<const std::uint8_t> bytes) {
  Bitstream bs;
  bs.header = parse_header(bytes);
  if (bytes.size() < kHeaderSize + 4) throw FormatError("stream truncated before z_len");
  const std::uint32_t zlen = get_be(bytes, kHeaderSize, 4);
  const std::size_t zstart = kHeaderSize + 4;
  if (bytes.size() - zstart < zlen) throw FormatError("stream truncated inside the z payload");
  bs.z_payload.assign(bytes.begin() + zstart, bytes.begin() + zstart + zlen);
  bs.y_payload.assign(bytes.begin() + zstart + zlen, bytes.end());
  return bs;
}

double bits_per_pixel(std::size_t bytes, int width, int height) {
  return 8.0 * static_cast<double>(bytes) / (static_cast<double>(width) * height);
}

CdfTable z_cdf(double sigma) { return latent_cdf(GmmParams{{1.0}, {0.0}, {sigma}}); }

CdfTable latent_cdf(const GmmParams& p) {
  auto pmf = gmm_pmf_table(p);
  double total = 0.0;
  for (double v : pmf) total += v;
  for (auto& v : pmf) v /= total;
  return build_cdf(pmf, kDefaultPrecision);
}

template <typename T>
EncodeResult encode_image(const ImageTensor& x, const Model<T>& model, bool enhance) {
  const ModelConfig& cfg = model.config();
  if (enhance && !model.has_enhancement()) throw ConfigError("enhancement requested but the model has none");
  if (x.width < 1 || x.height < 1 || x.width > 65535 || x.height > 65535) {
    throw ShapeError("image extents must be within 1..65535");
  }
  NoGradGuard no_grad;
  const auto ext = latent_extents(x.width, x.height);
  auto [padded, record] = pad_for_scales(x, kImageScales);

  EncodeResult res;
  res.y = quantize_round(model.transforms().analysis(image_to_tensor<T>(padded)));
  res.z = quantize_round(model.transforms().hyper_analysis(res.y.to_tensor<T>()));
  if (res.y.height != ext.hy || res.y.width != ext.wy || res.z.height != ext.hz || res.z.width != ext.wz) {
    throw ShapeError("latent extents disagree with the padding ladder");
  }

  CodingEstimator est(model.params(), cfg);
  RangeEncoder zenc;
  const std::size_t zplane = static_cast<std::size_t>(ext.hz) * ext.wz;
  for (int c = 0; c < res.z.channels; ++c) {
    const auto table = z_cdf(est.z_sigma()[c]);
    for (std::size_t i = 0; i < zplane; ++i) {
      const int v = res.z.values[c * zplane + i];
      res.z_bits_estimate += coded_bits(z_pmf(est.z_sigma()[c], v));
      zenc.encode(table, symbol_of(v));
    }
  }
  res.stream.z_payload = zenc.finish();

  auto hyper = model.transforms().hyper_synthesis(res.z.to_tensor<T>(), ext.hy, ext.wy);
  est.reset(raster_double(hyper), ext.hy, ext.wy);
  RangeEncoder yenc;
  const std::size_t yplane = static_cast<std::size_t>(ext.hy) * ext.wy;
  while (!est.done()) {
    const std::size_t pos = static_cast<std::size_t>(est.cursor());
    auto params = est.estimate_next(res.y);
    for (int c = 0; c < cfg.m; ++c) {
      const int v = res.y.values[c * yplane + pos];
      res.y_bits_estimate += coded_bits(gmm_pmf(params[c], v));
      yenc.encode(latent_cdf(params[c]), symbol_of(v));
    }
    est.commit(res.y);
  }
  res.stream.y_payload = yenc.finish();

  res.stream.header.flags = cfg.flags;
  res.stream.header.flags.enhancement = enhance;
  res.stream.header.width = static_cast<std::uint16_t>(x.width);
  res.stream.header.height = static_cast<std::uint16_t>(x.height);
  res.stream.header.model_id = static_cast<std::uint8_t>(cfg.model_id);
  res.bpp = bits_per_pixel(res.stream.size_bytes(), x.width, x.height);
  return res;
}

template <typename T>
DecodeResult decode_image(const Bitstream& stream, const Model<T>& model, std::vector<AccessRecord>* access_log) {
  const ModelConfig& cfg = model.config();
  check_stream_matches(stream.header, cfg);
  NoGradGuard no_grad;
  const auto ext = latent_extents(stream.header.width, stream.header.height);

  DecodeResult res;
  CodingEstimator est(model.params(), cfg);
  res.z = LatentGrid(cfg.hyper_channels(), ext.hz, ext.wz);
  {
    RangeDecoder zdec(stream.z_payload);
    const std::size_t zplane = static_cast<std::size_t>(ext.hz) * ext.wz;
    for (int c = 0; c < res.z.channels; ++c) {
      const auto table = z_cdf(est.z_sigma()[c]);
      for (std::size_t i = 0; i < zplane; ++i) res.z.values[c * zplane + i] = value_of(zdec.decode(table));
    }
  }

  auto hyper = model.transforms().hyper_synthesis(res.z.to_tensor<T>(), ext.hy, ext.wy);
  est.reset(raster_double(hyper), ext.hy, ext.wy);
  est.set_access_log(access_log);
  res.y = LatentGrid(cfg.m, ext.hy, ext.wy);
  RangeDecoder ydec(stream.y_payload);
  const std::size_t yplane = static_cast<std::size_t>(ext.hy) * ext.wy;
  while (!est.done()) {
    const std::size_t pos = static_cast<std::size_t>(est.cursor());
    auto params = est.estimate_next(res.y);
    for (int c = 0; c < cfg.m; ++c) {
      const int v = value_of(ydec.decode(latent_cdf(params[c])));
      if (v < -kLatentClamp || v > kLatentClamp) throw FormatError("decoded a tail symbol; stream is corrupt");
      res.y.values[c * yplane + pos] = v;
    }
    est.commit(res.y);
  }

  auto xhat = model.transforms().synthesis(res.y.to_tensor<T>(), ext.record);
  if (stream.header.flags.enhancement) xhat = model.enhancer().forward(xhat);
  res.image = unpad(tensor_to_image(xhat), make_padding_record(stream.header.width, stream.header.height,
                                                                 kImageScales));
  return res;
}

template <typename T>
ImageTensor reconstruct(const ImageTensor& x, const Model<T>& model, bool enhance) {
  NoGradGuard no_grad;
  auto [padded, record] = pad_for_scales(x, kImageScales);
  auto y = quantize(model.transforms().analysis(image_to_tensor<T>(padded)), QuantMode::kRound);
  auto xhat = model.transforms().synthesis(y, record);
  if (enhance) xhat = model.enhancer().forward(xhat);
  return unpad(tensor_to_image(xhat), record);
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed: " + path.string());
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

#define JIQ_INSTANTIATE(T)                                                                            \
  template EncodeResult encode_image<T>(const ImageTensor&, const Model<T>&, bool);                    \
  template DecodeResult decode_image<T>(const Bitstream&, const Model<T>&, std::vector<AccessRecord>*); \
  template ImageTensor reconstruct<T>(const ImageTensor&, const Model<T>&, bool);

JIQ_INSTANTIATE(float)
JIQ_INSTANTIATE(double)

}  // namespace jiq
