#include <gtest/gtest.h>

#include <filesystem>

#include "jiq/enhancement.hpp"
#include "jiq/error.hpp"
#include "jiq/model.hpp"
#include "jiq/ops.hpp"
#include "test_util.hpp"

using namespace jiq;
using namespace jiq::testing;

namespace {

GrdnConfig tiny_grdn() { return {2, 2, 2, 4}; }

}  // namespace

TEST(Grdn, NamedConfigurations) {
  EXPECT_EQ(GrdnConfig::lightweight(), (GrdnConfig{4, 3, 3, 32}));
  EXPECT_EQ(GrdnConfig::full(), (GrdnConfig{4, 4, 8, 64}));
  EXPECT_THROW((GrdnConfig{0, 1, 1, 1}.validate()), ConfigError);
}

TEST(Grdn, FreshNetworkIsTheIdentity) {
  ParamStore<double> store;
  add_grdn_params(store, GrdnConfig::lightweight(), 1);
  Grdn<double> net(store, GrdnConfig::lightweight());
  Rng rng(1);
  auto x = image_to_tensor<double>(random_image(17, 11, rng));
  auto y = net.forward(x);
  ASSERT_EQ(y.shape(), x.shape());
  EXPECT_TRUE(std::equal(x.values().begin(), x.values().end(), y.values().begin()));
  // Each residual block starts as the identity too, not just the whole network.
  auto h = random_tensor({GrdnConfig::lightweight().kernels_per_conv, 6, 5}, rng);
  auto r = net.rdb(h, 2, 1);
  EXPECT_TRUE(std::equal(h.values().begin(), h.values().end(), r.values().begin()));
}

TEST(Grdn, ZeroConvWeightsMakeRdbTheIdentity) {
  ParamStore<double> store;
  add_grdn_params(store, tiny_grdn(), 2);
  zero_all(store);
  Grdn<double> net(store, tiny_grdn());
  Rng rng(2);
  auto x = random_tensor({4, 6, 5}, rng);
  auto y = net.rdb(x, 1, 0);
  EXPECT_TRUE(std::equal(x.values().begin(), x.values().end(), y.values().begin()));
  EXPECT_THROW(net.rdb(random_tensor({3, 6, 5}, rng), 0, 0), ShapeError);
}

TEST(Grdn, OutputIsClampedAndShapePreserving) {
  ParamStore<double> store;
  add_grdn_params(store, tiny_grdn(), 3);
  Rng rng(3);
  randomize(store, rng, 2.0);
  Grdn<double> net(store, tiny_grdn());
  for (auto [w, h] : {std::pair{1, 1}, {7, 3}, {16, 16}}) {
    auto y = net.forward(image_to_tensor<double>(random_image(w, h, rng)));
    EXPECT_EQ(y.shape(), (Shape{3, h, w}));
    for (double v : y.values()) ASSERT_LE(std::abs(v), 1.0);
  }
}

TEST(Grdn, GradientsMatchFiniteDifferences) {
  ParamStore<double> store;
  add_grdn_params(store, tiny_grdn(), 4);
  Rng rng(4);
  randomize(store, rng, 0.3);
  Grdn<double> net(store, tiny_grdn());
  auto x = image_to_tensor<double>(random_image(5, 6, rng));
  auto xs = Tensor<double>::constant(x.shape(), random_values(x.size(), rng, -0.5, 0.5));
  auto wts = random_tensor(x.shape(), rng);
  auto fn = [&] { return sum(mul(net.forward(xs), wts)); };
  auto rep = grad_check(fn, store_params(store), 1e-4, 1e-5, 30, 1);
  EXPECT_TRUE(rep.passed()) << rep.summary();
}

TEST(ModelConfig, ValidatesCombinationsAndRatePoints) {
  ModelConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.flags.mprm = false;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.flags.global_context = false;
  EXPECT_NO_THROW(cfg.validate());
  cfg.model_id = 8;
  EXPECT_THROW(cfg.validate(), ConfigError);
  const RatePoint* rp = find_rate_point(8);
  ASSERT_NE(rp, nullptr);
  EXPECT_EQ(rp->lambda, 0.01);
  EXPECT_EQ(rp->n, 256);
  EXPECT_EQ(rp->m, 600);
  EXPECT_EQ(find_rate_point(9), nullptr);
  EXPECT_EQ(rate_point_table().size(), 8u);
}

TEST(ModelConfig, FlagBitsRoundTrip) {
  for (int b = 0; b < 16; ++b) EXPECT_EQ(ModelFlags::from_bits(static_cast<std::uint8_t>(b)).bits(), b);
  EXPECT_THROW(ModelFlags::from_bits(0x10), FormatError);
  EXPECT_EQ((ModelFlags{true, false, true, true}.bits()), 0b1101);
}

TEST(ModelConfig, MetaRoundTrip) {
  ModelConfig cfg;
  cfg.n = 7;
  cfg.m = 9;
  cfg.flags.gmm = false;
  cfg.grdn = {1, 2, 3, 4};
  cfg.min_count = 12;
  EXPECT_EQ(ModelConfig::from_meta(cfg.to_meta()), cfg);
  auto bad = cfg.to_meta();
  bad[1] = 2.5f;
  EXPECT_THROW(ModelConfig::from_meta(bad), FormatError);
}

TEST(Model, AblationVariantsShareInitialWeights) {
  ModelConfig full;
  full.n = 4;
  full.m = 6;
  full.grdn = tiny_grdn();
  ModelConfig no_gc = full;
  no_gc.flags.global_context = false;
  Model<float> a(full, 9), b(no_gc, 9);
  for (const auto& [name, t] : b.params().items()) {
    ASSERT_TRUE(a.params().contains(name)) << name;
    const auto& u = a.params().get(name);
    ASSERT_TRUE(std::equal(t.values().begin(), t.values().end(), u.values().begin())) << name;
  }
  EXPECT_GT(a.params().size(), b.params().size());
}

TEST(Model, CheckpointRoundTripAndCast) {
  ModelConfig cfg;
  cfg.n = 4;
  cfg.m = 6;
  cfg.grdn = tiny_grdn();
  cfg.flags.gmm = false;
  Model<float> m(cfg, 3);
  auto path = std::filesystem::temp_directory_path() / "jiq_model_roundtrip.jiqw";
  m.save(path);
  auto loaded = Model<float>::load(path);
  EXPECT_EQ(loaded.config(), cfg);
  EXPECT_EQ(loaded.to_checkpoint(), m.to_checkpoint());
  auto d = m.cast<double>();
  for (const auto& [name, t] : m.params().items()) {
    const auto& u = d.params().get(name);
    for (std::size_t i = 0; i < t.size(); ++i) ASSERT_EQ(static_cast<double>(t.values()[i]), u.values()[i]);
  }
  std::filesystem::remove(path);
}

TEST(Model, CheckpointWithoutConfigOrWithWrongTensorsIsRejected) {
  ModelConfig cfg;
  cfg.n = 4;
  cfg.m = 6;
  cfg.grdn = tiny_grdn();
  Model<float> m(cfg, 3);
  auto entries = m.to_checkpoint();
  auto no_meta = entries;
  no_meta.erase(no_meta.begin());
  EXPECT_THROW(Model<float>::from_checkpoint(no_meta), FormatError);
  auto missing = entries;
  missing.pop_back();
  EXPECT_THROW(Model<float>::from_checkpoint(missing), FormatError);
}

TEST(Model, EnhancementCanBeOmitted) {
  ModelConfig cfg;
  cfg.n = 4;
  cfg.m = 6;
  cfg.flags.enhancement = false;
  Model<float> m(cfg, 1);
  EXPECT_FALSE(m.has_enhancement());
  EXPECT_THROW(m.enhancer(), ConfigError);
  EXPECT_TRUE(m.tensors_with_prefix({"q."}).empty());
}
