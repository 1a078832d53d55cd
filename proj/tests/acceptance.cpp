// Acceptance run: one PASS/FAIL line per criterion. Arguments select a subset
// of criteria by number; with none, all of them run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "jiq/codec.hpp"
#include "jiq/entropy_model.hpp"
#include "jiq/enhancement.hpp"
#include "jiq/metrics.hpp"
#include "jiq/ops.hpp"
#include "jiq/range_coder.hpp"
#include "jiq/trainer.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace jiq;
using namespace jiq::testing;

namespace {

// Tolerances and budgets.
constexpr int kCoderSymbols = 1'000'000;
constexpr double kCoderRelSlack = 1e-3;
constexpr double kSlackBits = 64.0;
constexpr double kCoderSeconds = 10.0;
constexpr int kRoundTripImages = 20;
constexpr double kRoundTripSeconds = 120.0;
constexpr double kRateRelSlack = 0.02;
constexpr long kRateModelSteps = 400;
constexpr double kPmfSumTol = 1e-6;
constexpr double kQuadratureTol = 1e-8;
constexpr double kContextTol = 1e-9;
constexpr int kEntropyDraws = 1000;
constexpr int kCausalPositions = 100;
constexpr double kGradTol = 1e-5;
constexpr long kOverfitSteps = 5000;
constexpr double kOverfitSeconds = 1800.0;
constexpr long kAblationSteps = 600;
constexpr int kAblationSeeds = 3;
constexpr int kAblationPatch = 128;  // 8x8 latents, so the global context passes its gate
constexpr int kHeldOutImages = 10;
constexpr double kMsssimTol = 1e-6;
constexpr double kPsnrTol = 1e-12;
constexpr double kBdDoubledTol = 0.1;  // percentage points around +100 %

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- 1: range coder

Outcome range_coder_criterion() {
  Rng rng(101);
  std::vector<CdfTable> tables;
  std::vector<std::vector<double>> pmfs;
  for (int t = 0; t < 257; ++t) {
    const int s = 2 + static_cast<int>(rng.below(kAlphabetSize - 1));
    const double skew = rng.uniform(0.5, 12.0);
    std::vector<double> p(s);
    double z = 0.0;
    for (auto& v : p) z += (v = std::pow(rng.uniform(), skew) + 1e-12);
    for (auto& v : p) v /= z;
    tables.push_back(build_cdf(p));
    pmfs.push_back(std::move(p));
  }
  std::vector<int> which(kCoderSymbols), symbols(kCoderSymbols);
  double cross_entropy = 0.0;
  for (int i = 0; i < kCoderSymbols; ++i) {
    which[i] = static_cast<int>(rng.below(tables.size()));
    const auto& p = pmfs[which[i]];
    double u = rng.uniform();
    int s = 0;
    while (s + 1 < static_cast<int>(p.size()) && u >= p[s]) u -= p[s++];
    symbols[i] = s;
    cross_entropy += tables[which[i]].cost_bits(s);
  }

  const auto t0 = std::chrono::steady_clock::now();
  RangeEncoder enc;
  for (int i = 0; i < kCoderSymbols; ++i) enc.encode(tables[which[i]], symbols[i]);
  const auto bytes = enc.finish();
  RangeDecoder dec(bytes);
  long mismatches = 0;
  for (int i = 0; i < kCoderSymbols; ++i) mismatches += dec.decode(tables[which[i]]) != symbols[i];
  const double secs = seconds_since(t0);

  const double actual = 8.0 * bytes.size();
  const double excess = actual - cross_entropy;
  Outcome o;
  o.pass = mismatches == 0 && std::abs(excess) <= kCoderRelSlack * cross_entropy + kSlackBits && secs < kCoderSeconds;
  o.detail = fmt("mismatches %.0f, %.0f bits vs cross-entropy %.1f (excess %.4f%%)", mismatches, actual,
                 cross_entropy, 100.0 * excess / cross_entropy) +
             fmt(", time %.2f s", secs);
  return o;
}

// ---------------------------------------------------------------- 2-3: codec

// Untrained weights give near-zero latents; scaling the analysis transforms
// and jittering the priors makes every coding path carry information.
Model<float> coding_model() {
  Model<float> model(ModelConfig{}, 7);
  Rng rng(77);
  for (auto [name, t] : model.params().items()) {
    if (name.rfind("ga.", 0) == 0 || name.rfind("ha.", 0) == 0) {
      for (auto& v : t.mutable_values()) v *= 2.5f;
    } else if (name.rfind("em.", 0) == 0 || name.rfind("q.tail", 0) == 0) {
      for (auto& v : t.mutable_values()) v += static_cast<float>(rng.uniform(-0.05, 0.05));
    }
  }
  return model;
}

// A prior fitted to its latents: a short codec-only run on toy images.
Model<float> rate_model() {
  TrainConfig cfg;
  cfg.model.flags.enhancement = false;
  cfg.iterations = kRateModelSteps;
  cfg.learning_rate = 1e-3;
  cfg.validate();
  Model<float> model(cfg.model, 3);
  std::vector<Rgb8Image> images;
  for (int i = 0; i < 8; ++i) images.push_back(toy_image(96, 96, 600 + i));
  PatchDataset data(images, cfg.patch_size, 3);
  train_stage(model, cfg, data, Stage::kCodec, cfg.iterations);
  return model;
}

struct CodecRun {
  Outcome roundtrip;
  Outcome rate;
};

CodecRun codec_criteria() {
  CodecRun run;
  const auto ladder = make_padding_record(13, 13, kCodecScales);
  std::vector<int> widths;
  for (int s = 0; s < kCodecScales; ++s) {
    widths.push_back(ladder.width_at(s));
    widths.push_back(ladder.padded_width_at(s));
  }
  widths.push_back(ladder.width_at(kCodecScales));
  const std::vector<int> expect_ladder{13, 14, 7, 8, 4, 4, 2, 2, 1, 2, 1, 2, 1};
  const bool ladder_ok = widths == expect_ladder;

  Rng rng(202);
  std::vector<std::pair<int, int>> sizes{{13, 17}, {500, 333}, {1, 1}, {16, 16}};
  while (static_cast<int>(sizes.size()) < kRoundTripImages) {
    sizes.emplace_back(1 + static_cast<int>(rng.below(160)), 1 + static_cast<int>(rng.below(160)));
  }
  std::vector<ImageTensor> images;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const auto [w, h] = sizes[i];
    images.push_back(i % 2 ? random_image(w, h, rng) : to_tensor(toy_image(w, h, 300 + i)));
  }
  const int n = static_cast<int>(images.size());

  const Model<float> stress = coding_model();
  int exact = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& x : images) {
    const auto enc = encode_image(x, stress, true);
    const auto dec = decode_image(Bitstream::parse(enc.stream.serialize()), stress);
    const auto ref = reconstruct(x, stress, true);
    if (dec.y.values == enc.y.values && dec.z.values == enc.z.values && to_rgb8(dec.image) == to_rgb8(ref)) ++exact;
    else std::cout << "  round trip mismatch at " << x.width << "x" << x.height << '\n';
  }
  const double secs = seconds_since(t0);
  run.roundtrip.pass = exact == n && ladder_ok && secs < kRoundTripSeconds;
  run.roundtrip.detail = fmt("%.0f/%.0f images byte-exact (incl. 13x17, 500x333), ladder 13->14->...->1 ", exact, n) +
                         (ladder_ok ? "ok" : "wrong") + fmt(", %.1f s", secs);

  const Model<float> fitted = rate_model();
  double worst_rate = 0.0, total_bits = 0.0;
  int rate_ok = 0;
  for (const auto& x : images) {
    const auto enc = encode_image(x, fitted, false);
    const double actual = 8.0 * enc.stream.y_payload.size();
    const double dev = std::abs(actual - enc.y_bits_estimate);
    total_bits += actual;
    worst_rate = std::max(worst_rate, dev / (kRateRelSlack * enc.y_bits_estimate + kSlackBits));
    if (dev <= kRateRelSlack * enc.y_bits_estimate + kSlackBits) ++rate_ok;
    else std::cout << "  rate gap at " << x.width << "x" << x.height << ": " << actual << " vs " << enc.y_bits_estimate << '\n';
  }
  run.rate.pass = rate_ok == n;
  run.rate.detail = fmt("%.0f/%.0f images within 2%% + 64 bits, worst gap %.1f%% of that allowance, %.0f y bits in total",
                        rate_ok, n, 100.0 * worst_rate, total_bits);
  return run;
}

// ---------------------------------------------------------------- 4: entropy math

Outcome entropy_math_criterion() {
  Rng rng(404);
  double worst_sum = 0.0, worst_quad = 0.0, worst_gc = 0.0;
  for (int d = 0; d < kEntropyDraws; ++d) {
    const auto p = random_gmm(rng, 1 + d % 3);
    const auto table = gmm_pmf_table(p);
    worst_sum = std::max(worst_sum, std::abs(std::accumulate(table.begin(), table.end(), 0.0) - 1.0));
    const int n = static_cast<int>(rng.below(25)) - 12;
    worst_quad = std::max(worst_quad, std::abs(gmm_pmf(p, n) - quadrature_mass(p, n - 0.5, n + 0.5)));
  }
  for (int f = 0; f < kEntropyDraws; ++f) {
    const int width = 4 + static_cast<int>(rng.below(9)), height = 2 + static_cast<int>(rng.below(8));
    auto plane = random_values(static_cast<std::size_t>(width) * height, rng, -6.0, 6.0);
    auto psi = random_values(225, rng, -2.5, 2.5);
    const int pos = 1 + static_cast<int>(rng.below(width * height - 1));
    const auto gc = global_context_at(plane, width, psi, 7, pos / width, pos % width, 1);
    const auto ref = brute_force_context(plane, width, psi, 7, pos / width, pos % width);
    worst_gc = std::max({worst_gc, std::abs(gc.mean - ref.mean), std::abs(gc.stddev - ref.stddev)});
  }

  auto plane = random_values(100, rng);
  std::vector<double> flat(225, 0.0);
  const auto below = global_context_at(plane, 10, flat, 7, 2, 9, 30);  // 29 causal positions
  const auto at = global_context_at(plane, 10, flat, 7, 3, 0, 30);     // 30
  const bool gate = below.mean == 0.0 && below.stddev == 0.0 && at.mean != 0.0 && at.stddev > 0.0;

  // Every offset |dy|, |dx| <= 12 must read psi at the clipped offset.
  const int k = 7, side = 15, width = 25, ph = 12, pw = 12;
  auto psi = random_values(side * side, rng, -3.0, 3.0);
  const auto w = build_weight_field(psi, k, ph, pw, width);
  auto logit = [&](int dy, int dx) { return psi[(clip_offset(dy, k) + k) * side + clip_offset(dx, k) + k]; };
  const std::size_t ref = static_cast<std::size_t>(ph) * width + pw - 1;
  double worst_clip = 0.0;
  for (int dy = -12; dy <= 0; ++dy) {
    for (int dx = -12; dx <= 12; ++dx) {
      if (dy == 0 && dx >= 0) continue;
      const std::size_t q = static_cast<std::size_t>(ph + dy) * width + pw + dx;
      worst_clip = std::max(worst_clip, std::abs(std::log(w[q] / w[ref]) - (logit(dy, dx) - logit(0, -1))));
    }
  }

  Outcome o;
  o.pass = worst_sum <= kPmfSumTol && worst_quad <= kQuadratureTol && worst_gc <= kContextTol && gate &&
           worst_clip <= 1e-12;
  o.detail = fmt("pmf sum err %.2e, quadrature err %.2e, context err %.2e, clip err %.2e", worst_sum, worst_quad,
                 worst_gc, worst_clip) +
             (gate ? ", 29/30 gate ok" : ", 29/30 gate wrong");
  return o;
}

// ---------------------------------------------------------------- 5: causality

Outcome causality_criterion() {
  ModelConfig cfg;
  cfg.m = 8;
  cfg.n = 8;
  cfg.min_count = 3;
  ParamStore<double> store;
  add_entropy_params(store, cfg, 5);
  Rng rng(505);
  randomize(store, rng, 0.3);
  EntropyModel<double> em(store, cfg);
  CodingEstimator est(store, cfg);
  const int h = 9, w = 11, plane = h * w;
  LatentGrid base(cfg.m, h, w);
  for (auto& v : base.values) v = static_cast<int>(rng.below(11)) - 5;
  auto hyper = random_tensor({2 * cfg.m, h, w}, rng);
  const std::vector<double> hyper_raster(hyper.values().begin(), hyper.values().end());

  auto sequential = [&](const LatentGrid& g) {
    est.reset(hyper_raster, h, w);
    std::vector<std::vector<GmmParams>> out;
    while (!est.done()) {
      out.push_back(est.estimate_next(g));
      est.commit(g);
    }
    return out;
  };
  const auto graph_base = em.estimate(hyper, base.to_tensor<double>());
  const auto seq_base = sequential(base);
  int unchanged = 0;
  for (int trial = 0; trial < kCausalPositions; ++trial) {
    const int p = static_cast<int>(rng.below(plane));
    auto changed = base;
    for (int c = 0; c < cfg.m; ++c) {
      for (int q = p; q < plane; ++q) changed.values[c * plane + q] = static_cast<int>(rng.below(61)) - 30;
    }
    const auto graph = em.estimate(hyper, changed.to_tensor<double>());
    const auto seq = sequential(changed);
    bool same = true;
    for (int c = 0; c < cfg.m * cfg.mixtures(); ++c) {
      const std::size_t i = static_cast<std::size_t>(c) * plane + p;
      same &= graph.pi.values()[i] == graph_base.pi.values()[i] && graph.mu.values()[i] == graph_base.mu.values()[i] &&
              graph.sigma.values()[i] == graph_base.sigma.values()[i];
    }
    for (int c = 0; c < cfg.m; ++c) {
      same &= seq[p][c].pi == seq_base[p][c].pi && seq[p][c].mu == seq_base[p][c].mu &&
              seq[p][c].sigma == seq_base[p][c].sigma;
    }
    unchanged += same;
  }
  Outcome o;
  o.pass = unchanged == kCausalPositions;
  o.detail = fmt("%.0f/%.0f positions bitwise unchanged under edits at and after them", unchanged, kCausalPositions);
  return o;
}

// ---------------------------------------------------------------- 6: gradients

Outcome gradient_criterion() {
  std::vector<std::pair<std::string, double>> errors;
  Rng rng(606);

  {
    ModelConfig cfg;
    cfg.n = 2;
    cfg.m = 3;
    ParamStore<double> store;
    add_transform_params(store, cfg, 13);
    Transforms<double> net(store, cfg);
    auto [img, rec] = pad_for_scales(random_image(19, 13, rng), kCodecScales);
    auto x = image_to_tensor<double>(img);
    auto y = random_tensor({cfg.m, rec.height_at(4), rec.width_at(4)}, rng, -2.0, 2.0);
    auto z = random_tensor({cfg.n, rec.height_at(6), rec.width_at(6)}, rng, -2.0, 2.0);
    auto fn = [&] {
      auto a = weighted_sum(net.analysis(x), 1);
      auto s = weighted_sum(net.synthesis(y, rec), 2);
      auto ha = weighted_sum(net.hyper_analysis(y), 3);
      auto hs = weighted_sum(net.hyper_synthesis(z, y.dim(1), y.dim(2)), 4);
      return add(add(a, s), add(ha, hs));
    };
    errors.emplace_back("transforms", grad_check(fn, store_params(store), 1e-4, kGradTol, 40, 5).worst());
  }
  {
    ModelConfig cfg;
    cfg.n = 3;
    cfg.m = 4;
    cfg.k = 2;
    cfg.min_count = 4;
    cfg.f_width_mult = 2;
    ParamStore<double> store;
    add_entropy_params(store, cfg, 10);
    randomize(store, rng, 0.3);
    EntropyModel<double> em(store, cfg);
    auto y = Tensor<double>::parameter({cfg.m, 4, 5}, random_values(cfg.m * 20, rng, -3.0, 3.0));
    auto hyper = Tensor<double>::parameter({2 * cfg.m, 4, 5}, random_values(2 * cfg.m * 20, rng));
    auto fn = [&] { return em.y_bits(y, em.estimate(hyper, y)); };
    std::vector<NamedTensor> f_params;
    for (const auto& [name, t] : store.items()) {
      if (name.rfind("em.f.", 0) == 0) f_params.emplace_back(name, t);
    }
    errors.emplace_back("f + MPRM", grad_check(fn, f_params, 1e-4, kGradTol, 30, 3).worst());
    std::vector<NamedTensor> gc_params{{"em.ydot.weight", store.get("em.ydot.weight")}, {"em.psi", store.get("em.psi")},
                                       {"y", y}};
    errors.emplace_back("ydot / psi", grad_check(fn, gc_params, 1e-4, kGradTol, 30, 4).worst());
  }
  {
    ParamStore<double> store;
    const GrdnConfig gcfg{2, 2, 2, 4};
    add_grdn_params(store, gcfg, 4);
    randomize(store, rng, 0.3);
    Grdn<double> net(store, gcfg);
    auto x = Tensor<double>::constant({3, 6, 5}, random_values(90, rng, -0.5, 0.5));
    auto wts = random_tensor({3, 6, 5}, rng);
    auto fn = [&] { return sum(mul(net.forward(x), wts)); };
    errors.emplace_back("GRDN", grad_check(fn, store_params(store), 1e-4, kGradTol, 30, 1).worst());
  }
  {
    ModelConfig cfg;
    cfg.n = 8;
    cfg.m = 6;
    cfg.k = 3;
    cfg.min_count = 4;
    cfg.f_width_mult = 2;
    cfg.grdn = {1, 1, 2, 4};
    Model<double> model(cfg, 12);
    for (auto [name, t] : model.params().items()) {
      if (name.rfind("q.tail", 0) == 0 || name.rfind("em.", 0) == 0) {
        for (auto& v : t.mutable_values()) v += rng.uniform(-0.05, 0.05);
      }
    }
    // Loss summed over three patches, one of them through an aligned crop.
    const std::vector<ImageTensor> xs{to_tensor(toy_image(32, 32, 14)), to_tensor(toy_image(48, 32, 15)),
                                      to_tensor(toy_image(32, 48, 16))};
    auto fn = [&] {
      Rng noise(17);
      LossOptions opt;
      opt.lambda = 0.2;
      Tensor<double> total;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        opt.crop.reset();
        if (i == 2) opt.crop = aligned_crop(0, 16, 32);
        auto l = total_loss(xs[i], model, opt, &noise).loss;
        total = total.defined() ? add(total, l) : l;
      }
      return total;
    };
    errors.emplace_back("loss (normwise)",
                        grad_check(fn, store_params(model.params()), 1e-5, kGradTol, 4, 19).normwise_error());
  }

  Outcome o;
  std::ostringstream s;
  for (const auto& [name, err] : errors) {
    o.pass &= err < kGradTol;
    s << (s.tellp() ? ", " : "") << name << ' ' << fmt("%.2e", err);
  }
  o.detail = s.str();
  return o;
}

// ---------------------------------------------------------------- 7: overfit

LossTerms<float> rounded_terms(const Model<float>& model, const ImageTensor& x, double lambda) {
  LossOptions opt;
  opt.lambda = lambda;
  opt.quant = QuantMode::kRound;
  NoGradGuard guard;
  return total_loss(x, model, opt, nullptr);
}

Outcome overfit_criterion() {
  TrainConfig cfg;
  cfg.iterations = kOverfitSteps;
  cfg.log_every = 500;
  cfg.validate();
  Model<float> model(cfg.model, cfg.seed);
  PatchDataset data({toy_image(64, 64, 707)}, 64, cfg.seed);
  const ImageTensor patch = data.next();
  const auto before = rounded_terms(model, patch, cfg.lambda);
  const auto t0 = std::chrono::steady_clock::now();
  train_stage(model, cfg, data, Stage::kJoint, cfg.iterations);
  const double secs = seconds_since(t0);
  const auto after = rounded_terms(model, patch, cfg.lambda);
  const double l0 = before.loss.item(), l1 = after.loss.item();
  Outcome o;
  o.pass = l1 < 0.5 * l0 && after.rate_bits < before.rate_bits && after.distortion <= before.distortion &&
           secs < kOverfitSeconds;
  o.detail = fmt("loss %.4f -> %.4f (%.1f%%), ", l0, l1, 100.0 * l1 / l0) +
             fmt("rate %.1f -> %.1f bits, MSE %.2f -> %.2f", before.rate_bits, after.rate_bits, before.distortion,
                 after.distortion) +
             fmt(", %.0f s", secs);
  return o;
}

// ---------------------------------------------------------------- 8: ablations

Outcome ablation_criterion() {
  std::vector<Rgb8Image> train_images;
  for (int i = 0; i < 20; ++i) train_images.push_back(toy_image(kAblationPatch, kAblationPatch, 800 + i));
  std::vector<ImageTensor> held_out;
  for (int i = 0; i < kHeldOutImages; ++i) held_out.push_back(to_tensor(toy_image(kAblationPatch, kAblationPatch, 900 + i)));

  const auto variants = ablation_variants();
  std::vector<double> mean_loss(variants.size(), 0.0);
  for (std::size_t v = 0; v < variants.size(); ++v) {
    for (int s = 0; s < kAblationSeeds; ++s) {
      TrainConfig cfg;
      cfg.model.flags = variants[v].flags;
      cfg.iterations = kAblationSteps;
      cfg.patch_size = kAblationPatch;
      cfg.seed = 1 + s;
      cfg.validate();
      Model<float> model(cfg.model, cfg.seed);
      PatchDataset data(train_images, cfg.patch_size, cfg.seed);
      train_stage(model, cfg, data, Stage::kJoint, cfg.iterations);
      mean_loss[v] += evaluate_loss(model, held_out, cfg.lambda) / kAblationSeeds;
    }
  }
  Outcome o;
  std::ostringstream s;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    if (v > 0) o.pass &= mean_loss[0] <= mean_loss[v];
    s << (v ? ", " : "") << variants[v].label << ' ' << fmt("%.5f", mean_loss[v]);
  }
  o.detail = "held-out loss over 3 seeds: " + s.str();
  return o;
}

// ---------------------------------------------------------------- 9: metrics

Outcome metrics_criterion() {
  Rng rng(909);
  double worst_ms = 0.0;
  for (auto [w, h] : {std::pair{16, 16}, {33, 40}, {64, 64}, {97, 130}, {256, 260}}) {
    Rgb8Image a{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * 3)};
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
      const int x = static_cast<int>(i / 3) % w, y = static_cast<int>(i / 3) / w;
      a.pixels[i] = static_cast<std::uint8_t>(std::clamp(127.5 + 90 * std::sin(0.11 * x + i % 3) * std::cos(0.07 * y) +
                                                             rng.uniform(-15, 15),
                                                         0.0, 255.0));
    }
    Rgb8Image b = a;
    for (auto& p : b.pixels) p = static_cast<std::uint8_t>(std::clamp(p + static_cast<int>(rng.below(41)) - 20, 0, 255));
    worst_ms = std::max(worst_ms, std::abs(ms_ssim(a, b) - oracle_ms_ssim(a, b)));
  }

  Rgb8Image a{9, 7, std::vector<std::uint8_t>(189)};
  for (auto& p : a.pixels) p = static_cast<std::uint8_t>(rng.below(255));
  Rgb8Image b = a;
  for (auto& p : b.pixels) p += 1;
  Rgb8Image black{4, 4, std::vector<std::uint8_t>(48, 0)}, white{4, 4, std::vector<std::uint8_t>(48, 255)};
  const bool psnr_ok = std::abs(psnr(a, b) - 20.0 * std::log10(255.0)) <= kPsnrTol && psnr(black, white) == 0.0 &&
                       psnr(a, a) == kPsnrIdentical;

  std::vector<RdSample> anchor, doubled;
  for (int i = 0; i < 6; ++i) {
    anchor.push_back({0.1 * std::pow(1.6, i), 27.0 + 2.2 * i + 0.1 * i * i});
    doubled.push_back({2.0 * anchor.back().rate, anchor.back().quality});
  }
  const double same = bd_rate(anchor, anchor);
  const double twice = bd_rate(anchor, doubled);

  Outcome o;
  o.pass = worst_ms <= kMsssimTol && psnr_ok && same == 0.0 && std::abs(twice - 100.0) <= kBdDoubledTol;
  o.detail = fmt("MS-SSIM oracle err %.2e, BD(A,A) %.3g%%, BD(A,2A) %.6f%%", worst_ms, same, twice) +
             (psnr_ok ? ", PSNR closed forms ok" : ", PSNR closed forms wrong");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  auto wanted = [&](int n) { return selected.empty() || std::find(selected.begin(), selected.end(), n) != selected.end(); };

  bool all = true;
  auto report = [&](int n, const char* name, const Outcome& o, double secs) {
    all &= o.pass;
    std::cout << "criterion " << n << " (" << name << "): " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail
              << fmt("  [%.1f s]", secs) << std::endl;
  };
  auto timed = [&](int n, const char* name, const std::function<Outcome()>& fn) {
    if (!wanted(n)) return;
    const auto t0 = std::chrono::steady_clock::now();
    const Outcome o = fn();
    report(n, name, o, seconds_since(t0));
  };

  timed(1, "range coder", range_coder_criterion);
  if (wanted(2) || wanted(3)) {
    const auto t0 = std::chrono::steady_clock::now();
    const CodecRun run = codec_criteria();
    const double secs = seconds_since(t0);
    if (wanted(2)) report(2, "codec round trip", run.roundtrip, secs);
    if (wanted(3)) report(3, "rate agreement", run.rate, secs);
  }
  timed(4, "entropy model math", entropy_math_criterion);
  timed(5, "causality", causality_criterion);
  timed(6, "gradients", gradient_criterion);
  timed(7, "overfit", overfit_criterion);
  timed(8, "ablations", ablation_criterion);
  timed(9, "metrics", metrics_criterion);
  return all ? 0 : 1;
}
