#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>

#include "jiq/error.hpp"
#include "jiq/metrics.hpp"
#include "jiq/parallel.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace jiq;
using namespace jiq::testing;

namespace {

Rgb8Image random_rgb8(int w, int h, Rng& rng) {
  Rgb8Image img{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * 3)};
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

// b = a plus bounded noise, so the pair has MS-SSIM well inside (0, 1).
Rgb8Image perturbed(const Rgb8Image& a, int amplitude, Rng& rng) {
  Rgb8Image b = a;
  for (auto& p : b.pixels) {
    const int v = p + static_cast<int>(rng.below(2 * amplitude + 1)) - amplitude;
    p = static_cast<std::uint8_t>(std::clamp(v, 0, 255));
  }
  return b;
}

// Smooth content so structure survives downsampling.
Rgb8Image smooth_rgb8(int w, int h, Rng& rng) {
  Rgb8Image img{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * 3)};
  const double fx = rng.uniform(0.05, 0.3), fy = rng.uniform(0.05, 0.3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = 127.5 + 100.0 * std::sin(fx * x + c) * std::cos(fy * y - c) + rng.uniform(-20, 20);
        img.pixels[(static_cast<std::size_t>(y) * w + x) * 3 + c] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
      }
    }
  }
  return img;
}

std::vector<RdSample> linear_curve(double a, double b, std::vector<double> qualities) {
  std::vector<RdSample> out;
  for (double q : qualities) out.push_back({std::pow(10.0, a + b * q), q});
  return out;
}

}  // namespace

TEST(Psnr, ClosedForms) {
  Rng rng(1);
  auto a = random_rgb8(9, 7, rng);
  EXPECT_EQ(psnr(a, a), kPsnrIdentical);
  Rgb8Image b = a;
  for (std::size_t i = 0; i < b.pixels.size(); ++i) b.pixels[i] = a.pixels[i] < 255 ? a.pixels[i] + 1 : 254;
  EXPECT_NEAR(psnr(a, b), 48.13080360867910, 1e-12);
  Rgb8Image black{4, 4, std::vector<std::uint8_t>(48, 0)}, white{4, 4, std::vector<std::uint8_t>(48, 255)};
  EXPECT_EQ(psnr(black, white), 0.0);
  EXPECT_THROW(psnr(black, random_rgb8(4, 5, rng)), ShapeError);
}

TEST(Psnr, DecreasesWithNoiseAmplitude) {
  Rng rng(2);
  auto a = smooth_rgb8(32, 32, rng);
  double last = kPsnrIdentical;
  for (int amp : {1, 2, 4, 8, 16, 32}) {
    const double p = psnr(a, perturbed(a, amp, rng));
    EXPECT_LT(p, last);
    last = p;
  }
}

TEST(MsSsim, ScaleCount) {
  EXPECT_EQ(ms_ssim_scales(16, 16), 1);
  EXPECT_EQ(ms_ssim_scales(31, 100), 1);
  EXPECT_EQ(ms_ssim_scales(32, 32), 2);
  EXPECT_EQ(ms_ssim_scales(255, 300), 4);
  EXPECT_EQ(ms_ssim_scales(256, 256), 5);
  EXPECT_EQ(ms_ssim_scales(4000, 3000), 5);
  EXPECT_THROW(ms_ssim_scales(15, 64), ShapeError);
}

TEST(MsSsim, TapsAreNormalizedGaussian) {
  auto t = ssim_taps();
  ASSERT_EQ(t.size(), 11u);
  double s = 0;
  for (double v : t) s += v;
  EXPECT_NEAR(s, 1.0, 1e-15);
  EXPECT_NEAR(t[5] / t[6], std::exp(1.0 / (2 * 1.5 * 1.5)), 1e-12);
}

TEST(MsSsim, IdentityAndSymmetry) {
  Rng rng(3);
  auto a = smooth_rgb8(48, 40, rng);
  auto b = perturbed(a, 10, rng);
  EXPECT_NEAR(ms_ssim(a, a), 1.0, 1e-9);
  EXPECT_LT(ms_ssim(a, b), 1.0 - 1e-6);
  EXPECT_NEAR(ms_ssim(a, b), ms_ssim(b, a), 1e-12);
}

TEST(MsSsim, MatchesDefinitionOracle) {
  Rng rng(4);
  for (auto [w, h] : {std::pair{16, 16}, {40, 37}, {70, 64}, {140, 131}, {256, 260}}) {
    for (int amp : {3, 40}) {
      auto a = smooth_rgb8(w, h, rng);
      auto b = perturbed(a, amp, rng);
      EXPECT_NEAR(ms_ssim(a, b), oracle_ms_ssim(a, b), 1e-6) << w << "x" << h << " amp " << amp;
    }
  }
  auto a = random_rgb8(33, 35, rng), b = random_rgb8(33, 35, rng);
  EXPECT_NEAR(ms_ssim(a, b), oracle_ms_ssim(a, b), 1e-6);
}

TEST(MsSsim, GradientMatchesFiniteDifferences) {
  Rng rng(5);
  auto a = Tensor<double>::parameter({3, 20, 18}, random_values(3 * 20 * 18, rng, 40, 220));
  auto b_values = a.values();
  std::vector<double> bv(b_values.begin(), b_values.end());
  for (auto& v : bv) v += rng.uniform(-30, 30);
  auto b = Tensor<double>::constant({3, 20, 18}, bv);
  auto report = grad_check([&] { return ms_ssim(a, b); }, {{"a", a}}, 1e-3, 1e-5, 200, 7);
  EXPECT_TRUE(report.passed()) << report.summary();
}

TEST(MsSsim, DecibelTransform) {
  EXPECT_NEAR(msssim_db(0.9), 10.0, 1e-12);
  EXPECT_NEAR(msssim_db(0.99), 20.0, 1e-12);
  EXPECT_TRUE(std::isinf(msssim_db(1.0)));
}

TEST(BdRate, IdenticalCurvesGiveZero) {
  std::vector<RdSample> a{{0.1, 28.0}, {0.25, 30.5}, {0.5, 33.0}, {1.1, 36.2}, {2.0, 39.0}};
  EXPECT_EQ(bd_rate(a, a), 0.0);
}

TEST(BdRate, DoubledRatesGiveOneHundredPercent) {
  std::vector<RdSample> a{{0.1, 28.0}, {0.25, 30.5}, {0.5, 33.0}, {1.1, 36.2}, {2.0, 39.0}};
  auto b = a;
  for (auto& p : b) p.rate *= 2;
  EXPECT_NEAR(bd_rate(a, b), 100.0, 1e-9);
  EXPECT_NEAR(bd_rate(b, a), -50.0, 1e-9);
}

TEST(BdRate, LinearCurvesMatchClosedForm) {
  // log10 r = a + b q; shifting quality by d changes log10 rate by -b d.
  const double slope = 0.08, d = 0.7;
  auto anchor = linear_curve(-3.0, slope, {26, 29, 31, 34, 38});
  auto test = linear_curve(-3.0 - slope * d, slope, {25.5, 28, 30, 33.5, 36, 39});
  EXPECT_NEAR(bd_rate(anchor, test), (std::pow(10.0, -slope * d) - 1.0) * 100.0, 1e-9);
}

TEST(BdRate, IsAntisymmetricOnSeparatedCurves) {
  std::vector<RdSample> a{{0.1, 28.0}, {0.25, 30.5}, {0.5, 33.0}, {1.1, 36.2}};
  std::vector<RdSample> b{{0.09, 28.4}, {0.2, 30.9}, {0.45, 33.6}, {1.0, 36.5}};
  const double ab = bd_rate(a, b), ba = bd_rate(b, a);
  EXPECT_LT(ab, 0.0);
  EXPECT_GT(ba, 0.0);
}

TEST(BdRate, RejectsBadCurves) {
  std::vector<RdSample> a{{0.1, 28.0}, {0.25, 30.5}, {0.5, 33.0}, {1.1, 36.2}};
  std::vector<RdSample> short_curve(a.begin(), a.begin() + 3);
  EXPECT_THROW(bd_rate(a, short_curve), FormatError);
  auto bumpy = a;
  bumpy[2].quality = 29.0;
  EXPECT_THROW(bd_rate(a, bumpy), FormatError);
  auto far = a;
  for (auto& p : far) p.quality += 20;
  EXPECT_THROW(bd_rate(a, far), FormatError);
  auto zero = a;
  zero[0].rate = 0;
  EXPECT_THROW(bd_rate(a, zero), FormatError);
}

TEST(RdCsv, RoundTripAndAverages) {
  std::vector<RdRow> rows{{"a.png", 0.5, 30.0, 0.95, msssim_db(0.95)}, {"b.png", 0.7, 32.5, 0.97, msssim_db(0.97)}};
  rows.push_back(average_row(rows));
  EXPECT_DOUBLE_EQ(rows.back().bpp, 0.6);
  EXPECT_DOUBLE_EQ(rows.back().psnr_db, 31.25);
  auto path = std::filesystem::temp_directory_path() / "jiq_metrics_rd.csv";
  write_rd_csv(path, rows);
  auto back = read_rd_csv(path);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].image, rows[i].image);
    EXPECT_NEAR(back[i].msssim_db, rows[i].msssim_db, 1e-9);
  }
  write_rd_csv(path, {rows.back()}, true);
  EXPECT_EQ(read_rd_csv(path).size(), 4u);
  std::filesystem::remove(path);
}

TEST(RdCsv, CurveUsesAverageRowsWhenEnough) {
  std::vector<RdRow> rows;
  for (int i = 0; i < 4; ++i) {
    rows.push_back({"img.png", 9.0, 9.0, 0.5, 3.0});
    rows.push_back({kAverageRow, 0.1 * (i + 1), 30.0 + i, 0.9, 10.0 + i});
  }
  auto curve = rd_curve(rows, QualityMetric::kPsnr);
  ASSERT_EQ(curve.size(), 4u);
  EXPECT_DOUBLE_EQ(curve[3].quality, 33.0);
  rows.pop_back();
  EXPECT_EQ(rd_curve(rows, QualityMetric::kMsssimDb).size(), 4u);
  EXPECT_DOUBLE_EQ(rd_curve(rows, QualityMetric::kMsssimDb)[0].quality, 3.0);
}

TEST(RdEval, OneRowPerImagePlusAverage) {
  ModelConfig cfg;
  cfg.n = 8;
  cfg.m = 6;
  cfg.k = 3;
  cfg.f_width_mult = 2;
  cfg.grdn = {1, 1, 2, 4};
  Model<double> model(cfg, 3);
  auto dir = std::filesystem::temp_directory_path() / "jiq_rd_eval";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  Rng rng(6);
  write_png(dir / "b.png", smooth_rgb8(24, 20, rng));
  write_ppm(dir / "a.ppm", smooth_rgb8(17, 33, rng));
  auto rows = rd_eval(model, dir, true);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].image, "a.ppm");
  EXPECT_EQ(rows[1].image, "b.png");
  EXPECT_EQ(rows[2].image, kAverageRow);
  EXPECT_DOUBLE_EQ(rows[2].bpp, (rows[0].bpp + rows[1].bpp) / 2);
  for (int i = 0; i < 2; ++i) {
    EXPECT_GT(rows[i].bpp, 0.0);
    EXPECT_LE(rows[i].msssim, 1.0);
  }
  std::filesystem::remove_all(dir);
  EXPECT_THROW(rd_eval(model, dir, false), std::exception);
}

TEST(Parallel, OrderIsDeterministicAndErrorsPropagate) {
  ::setenv("JOINTIQ_THREADS", "3", 1);
  EXPECT_EQ(worker_count(), 3);
  std::vector<int> out(100);
  parallel_for(out.size(), [&](std::size_t i) { out[i] = static_cast<int>(i * i); });
  for (std::size_t i = 0; i < out.size(); ++i) ASSERT_EQ(out[i], static_cast<int>(i * i));
  EXPECT_THROW(parallel_for(10, [](std::size_t i) { if (i == 4) throw NumericError("x"); }), NumericError);
  ::setenv("JOINTIQ_THREADS", "zero", 1);
  EXPECT_THROW(worker_count(), ConfigError);
  ::unsetenv("JOINTIQ_THREADS");
  EXPECT_GE(worker_count(), 1);
}
