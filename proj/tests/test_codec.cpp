#include <gtest/gtest.h>

#include <filesystem>

#include "jiq/codec.hpp"
#include "jiq/error.hpp"
#include "test_util.hpp"

using namespace jiq;
using namespace jiq::testing;

namespace {

ModelConfig small_config(ModelFlags flags = {}) {
  ModelConfig cfg;
  cfg.n = 8;
  cfg.m = 6;
  cfg.k = 3;
  cfg.min_count = 4;
  cfg.f_width_mult = 2;
  cfg.grdn = {1, 1, 2, 4};
  cfg.flags = flags;
  return cfg;
}

// Untrained models get non-trivial priors so every code path carries information.
Model<double> small_model(ModelFlags flags = {}, std::uint64_t seed = 5) {
  Model<double> model(small_config(flags), seed);
  Rng rng(seed + 100);
  for (auto [name, t] : model.params().items()) {
    if (name.rfind("ga.", 0) == 0 || name.rfind("ha.", 0) == 0) {
      for (auto& v : t.mutable_values()) v *= 2.5;
    } else if (name.rfind("em.", 0) == 0 || name.rfind("q.tail", 0) == 0) {
      for (auto& v : t.mutable_values()) v += rng.uniform(-0.05, 0.05);
    }
  }
  return model;
}

double mean_abs(const LatentGrid& g) {
  double s = 0.0;
  for (int v : g.values) s += std::abs(v);
  return s / static_cast<double>(g.values.size());
}

std::vector<std::uint8_t> pixels(const ImageTensor& img) { return to_rgb8(img).pixels; }

}  // namespace

TEST(StreamHeader, RoundTripsAndHasFixedSize) {
  StreamHeader h;
  h.flags = ModelFlags{false, true, false, true};
  h.width = 65535;
  h.height = 65535;
  h.model_id = 7;
  auto bytes = serialize_header(h);
  ASSERT_EQ(bytes.size(), kHeaderSize);
  EXPECT_EQ(parse_header(bytes), h);
  EXPECT_EQ(bytes[5], 0b1010);
  EXPECT_EQ(bytes[6], 0xFF);
}

TEST(StreamHeader, RejectsBadInput) {
  StreamHeader h;
  h.width = 3;
  h.height = 4;
  auto bytes = serialize_header(h);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(parse_header(bad), FormatError);
  bad = bytes;
  bad[4] = 2;
  EXPECT_THROW(parse_header(bad), FormatError);
  bad = bytes;
  bad[5] = 0x10;
  EXPECT_THROW(parse_header(bad), FormatError);
  EXPECT_THROW(parse_header(std::span(bytes).first(10)), FormatError);
}

TEST(Bitstream, SerializeParse) {
  Bitstream bs;
  bs.header.width = 10;
  bs.header.height = 20;
  bs.z_payload = {1, 2, 3};
  bs.y_payload = {4, 5, 6, 7};
  auto bytes = bs.serialize();
  EXPECT_EQ(bytes.size(), bs.size_bytes());
  EXPECT_EQ(Bitstream::parse(bytes), bs);
  bytes.resize(kHeaderSize + 4 + 2);
  EXPECT_THROW(Bitstream::parse(bytes), FormatError);
}

TEST(Codec, LatentRoundTripAcrossSizes) {
  auto model = small_model();
  Rng rng(11);
  for (auto [w, h] : {std::pair{1, 1}, {13, 17}, {32, 16}, {37, 29}}) {
    auto x = random_image(w, h, rng);
    auto enc = encode_image(x, model, true);
    auto bytes = enc.stream.serialize();
    EXPECT_DOUBLE_EQ(enc.bpp, bits_per_pixel(bytes.size(), w, h));
    auto dec = decode_image(Bitstream::parse(bytes), model);
    if (w * h > 100) EXPECT_GT(mean_abs(enc.y), 1.0);
    EXPECT_EQ(dec.y.values, enc.y.values) << w << "x" << h;
    EXPECT_EQ(dec.z.values, enc.z.values) << w << "x" << h;
    EXPECT_EQ(dec.image.width, w);
    EXPECT_EQ(dec.image.height, h);
    EXPECT_EQ(pixels(dec.image), pixels(reconstruct(x, model, true)));
  }
}

TEST(Codec, EveryFlagSetRoundTrips) {
  Rng rng(12);
  auto x = random_image(27, 21, rng);
  for (ModelFlags f : {ModelFlags{true, true, true, true}, ModelFlags{false, true, true, true},
                       ModelFlags{false, true, false, false}, ModelFlags{true, false, true, true},
                       ModelFlags{false, false, false, true}}) {
    auto model = small_model(f);
    for (bool enhance : {false, true}) {
      if (enhance && !f.enhancement) continue;
      auto enc = encode_image(x, model, enhance);
      EXPECT_EQ(enc.stream.header.flags.global_context, f.global_context);
      EXPECT_EQ(enc.stream.header.flags.enhancement, enhance);
      auto dec = decode_image(enc.stream, model);
      EXPECT_EQ(dec.y.values, enc.y.values) << f.describe();
      EXPECT_EQ(pixels(dec.image), pixels(reconstruct(x, model, enhance))) << f.describe();
    }
  }
}

TEST(Codec, EnhancementBitSelectsOutput) {
  auto model = small_model();
  Rng rng(13);
  auto x = random_image(19, 16, rng);
  auto off = decode_image(encode_image(x, model, false).stream, model).image;
  auto on = decode_image(encode_image(x, model, true).stream, model).image;
  EXPECT_NE(pixels(off), pixels(on));
  EXPECT_EQ(pixels(off), pixels(reconstruct(x, model, false)));
}

TEST(Codec, ActualRateTracksEstimate) {
  auto model = small_model();
  Rng rng(14);
  for (auto [w, h] : {std::pair{64, 64}, {45, 70}}) {
    auto enc = encode_image(random_image(w, h, rng), model, false);
    const double actual = 8.0 * enc.stream.y_payload.size();
    EXPECT_LE(std::abs(actual - enc.y_bits_estimate), 0.02 * enc.y_bits_estimate + 64.0);
    const double zactual = 8.0 * enc.stream.z_payload.size();
    EXPECT_LE(std::abs(zactual - enc.z_bits_estimate), 0.02 * enc.z_bits_estimate + 64.0);
  }
}

TEST(Codec, EncodeAndDecodeAreDeterministic) {
  Rng rng(15);
  auto x = random_image(23, 18, rng);
  auto a = small_model();
  auto b = small_model();
  auto ea = encode_image(x, a, true);
  auto eb = encode_image(x, b, true);
  EXPECT_EQ(ea.stream.serialize(), eb.stream.serialize());
  EXPECT_EQ(pixels(decode_image(ea.stream, a).image), pixels(decode_image(eb.stream, b).image));
}

TEST(Codec, DecoderReadsOnlyCausalLatents) {
  auto model = small_model();
  Rng rng(16);
  auto enc = encode_image(random_image(40, 40, rng), model, false);
  std::vector<AccessRecord> log;
  decode_image(enc.stream, model, &log);
  ASSERT_FALSE(log.empty());
  for (const auto& r : log) ASSERT_LT(r.read, r.cursor);
}

TEST(Codec, RejectsMismatchedModels) {
  auto model = small_model();
  Rng rng(17);
  auto enc = encode_image(random_image(16, 16, rng), model, true);
  auto no_gc = small_model(ModelFlags{false, true, true, true});
  EXPECT_THROW(decode_image(enc.stream, no_gc), FormatError);
  auto no_q = small_model(ModelFlags{true, true, false, true});
  EXPECT_THROW(decode_image(enc.stream, no_q), FormatError);
  EXPECT_THROW(encode_image(random_image(8, 8, rng), no_q, true), ConfigError);
}

TEST(Codec, TruncatedPayloadIsAFormatError) {
  auto model = small_model();
  Rng rng(18);
  auto enc = encode_image(random_image(32, 32, rng), model, false);
  auto bytes = enc.stream.serialize();
  bytes.resize(kHeaderSize + 4 + enc.stream.z_payload.size() + 2);
  EXPECT_THROW(decode_image(Bitstream::parse(bytes), model), FormatError);
}

TEST(Codec, FileIoRoundTrip) {
  auto path = std::filesystem::temp_directory_path() / "jiq_codec_test.jiq";
  std::vector<std::uint8_t> bytes{0, 1, 2, 250, 255};
  write_file(path, bytes);
  EXPECT_EQ(read_file(path), bytes);
  std::filesystem::remove(path);
  EXPECT_THROW(read_file(path), FormatError);
}
