#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <string>

#include "jiq/codec.hpp"
#include "jiq/error.hpp"
#include "jiq/metrics.hpp"
#include "jiq/trainer.hpp"

namespace fs = std::filesystem;
using namespace jiq;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitFormat = 3;
constexpr int kExitNumeric = 4;

struct TrainArgs {
  fs::path config, data, out, log;
  std::optional<fs::path> resume;
  std::string stage = "joint";
};

struct EncodeArgs {
  fs::path model, input, output;
  bool no_gc = false, no_mprm = false, single_gaussian = false, no_enhance = false;
};

struct DecodeArgs {
  fs::path model, input, output;
};

struct EvalArgs {
  fs::path model, dataset, csv;
  bool no_enhance = false, append = false;
};

struct BdrateArgs {
  fs::path anchor, test;
  std::string metric = "psnr";
};

struct ToysetArgs {
  fs::path out;
  int count = 10, width = 64, height = 64;
  std::uint64_t seed = 1;
};

Model<float> load_model(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("checkpoint not found: " + path.string());
  return Model<float>::load(path);
}

int run_train(const TrainArgs& a) {
  const TrainConfig cfg = load_train_config(a.config);
  PatchDataset data = PatchDataset::from_directory(a.data, cfg.patch_size, cfg.seed);
  Model<float> model = [&] {
    if (!a.resume) return Model<float>(cfg.model, cfg.seed);
    if (!fs::exists(*a.resume)) throw ConfigError("resume checkpoint not found: " + a.resume->string());
    auto m = Model<float>::load(*a.resume);
    if (!(m.config() == cfg.model)) throw ConfigError("resume checkpoint was built with a different model configuration");
    return m;
  }();
  const fs::path log_path = a.log.empty() ? fs::path(a.out).replace_extension(".log.csv") : a.log;
  std::ofstream log(log_path);
  if (!log) throw ConfigError("cannot write training log " + log_path.string());
  log << kTrainLogHeader << '\n';
  if (a.stage == "a") {
    const long steps = cfg.stage_a_iterations > 0 ? cfg.stage_a_iterations : cfg.iterations;
    std::cerr << "stage a: steps 0.." << steps - 1 << '\n';
    train_stage(model, cfg, data, Stage::kEnhancement, steps, 0, &log);
  } else if (a.stage == "b") {
    std::cerr << "stage b: steps 0.." << cfg.iterations - 1 << '\n';
    train_stage(model, cfg, data, Stage::kJoint, cfg.iterations, 0, &log);
  } else {
    train_procedure(model, cfg, data, &log, &std::cerr);
  }
  model.save(a.out);
  std::cout << "wrote " << a.out.string() << " and " << log_path.string() << '\n';
  return 0;
}

void check_ablation_flags(const EncodeArgs& a, const ModelFlags& have) {
  auto require = [](bool excluded, bool present, const char* flag, const char* what) {
    if (excluded && present) {
      throw ConfigError(std::string(flag) + " needs a checkpoint trained without " + what);
    }
    if (!excluded && !present) {
      throw ConfigError(std::string("checkpoint was trained without ") + what + "; pass " + flag);
    }
  };
  require(a.no_gc, have.global_context, "--no-gc", "global context");
  require(a.no_mprm, have.mprm, "--no-mprm", "MPRM");
  require(a.single_gaussian, have.gmm, "--single-gaussian", "a mixture prior");
}

int run_encode(const EncodeArgs& a) {
  const Model<float> model = load_model(a.model);
  check_ablation_flags(a, model.config().flags);
  const Rgb8Image img = read_image(a.input);
  const auto enc = encode_image(to_tensor(img), model, model.has_enhancement() && !a.no_enhance);
  const auto bytes = enc.stream.serialize();
  write_file(a.output, bytes);
  const double bpp = bits_per_pixel(bytes.size(), img.width, img.height);
  std::cout << std::setprecision(std::numeric_limits<double>::max_digits10) << "bpp " << bpp << '\n'
            << "bytes " << bytes.size() << '\n'
            << "flags " << enc.stream.header.flags.describe() << '\n';
  return 0;
}

int run_decode(const DecodeArgs& a) {
  const Model<float> model = load_model(a.model);
  const auto stream = Bitstream::parse(read_file(a.input));
  const auto dec = decode_image(stream, model);
  write_image(a.output, to_rgb8(dec.image));
  std::cout << "decoded " << dec.image.width << "x" << dec.image.height << " to " << a.output.string() << '\n';
  return 0;
}

int run_eval(const EvalArgs& a) {
  const Model<float> model = load_model(a.model);
  if (!fs::is_directory(a.dataset)) throw ConfigError("not a directory: " + a.dataset.string());
  const auto rows = rd_eval(model, a.dataset, model.has_enhancement() && !a.no_enhance);
  write_rd_csv(a.csv, rows, a.append);
  const RdRow& avg = rows.back();
  std::cout << std::setprecision(6) << "images " << rows.size() - 1 << "  bpp " << avg.bpp << "  psnr " << avg.psnr_db
            << " dB  ms-ssim " << avg.msssim << " (" << avg.msssim_db << " dB)\n";
  return 0;
}

int run_bdrate(const BdrateArgs& a) {
  const QualityMetric metric = a.metric == "psnr" ? QualityMetric::kPsnr : QualityMetric::kMsssimDb;
  const double pct = bd_rate(rd_curve(read_rd_csv(a.anchor), metric), rd_curve(read_rd_csv(a.test), metric));
  std::cout << std::fixed << std::setprecision(4) << "bd-rate " << pct << " %\n";
  return 0;
}

int run_toyset(const ToysetArgs& a) {
  fs::create_directories(a.out);
  for (int i = 0; i < a.count; ++i) {
    std::ostringstream name;
    name << "toy" << std::setw(3) << std::setfill('0') << i << ".png";
    write_png(a.out / name.str(), toy_image(a.width, a.height, a.seed + static_cast<std::uint64_t>(i)));
  }
  std::cout << "wrote " << a.count << " images to " << a.out.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"jointiq: learned image codec with a cascaded quality-enhancement network"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a model from a folder of images");
  t->add_option("--config", train.config, "key = value training config")->required();
  t->add_option("--data", train.data, "folder of .png/.ppm training images")->required();
  t->add_option("--out", train.out, "output checkpoint")->required();
  t->add_option("--resume", train.resume, "start from this checkpoint");
  t->add_option("--stage", train.stage, "a: enhancement only, b: joint, joint: a then b")
      ->check(CLI::IsMember({"a", "b", "joint"}));
  t->add_option("--log", train.log, "training CSV (default: <out>.log.csv)");

  EncodeArgs enc;
  auto* e = app.add_subcommand("encode", "Compress an image to a .jiq stream");
  e->add_option("--model", enc.model, "checkpoint")->required();
  e->add_option("--input", enc.input, "PNG or PPM image")->required();
  e->add_option("--output", enc.output, ".jiq output")->required();
  e->add_flag("--no-gc", enc.no_gc, "checkpoint excludes the global context");
  e->add_flag("--no-mprm", enc.no_mprm, "checkpoint excludes MPRM");
  e->add_flag("--single-gaussian", enc.single_gaussian, "checkpoint uses a single Gaussian prior");
  e->add_flag("--no-enhance", enc.no_enhance, "decode without the enhancement network");

  DecodeArgs dec;
  auto* d = app.add_subcommand("decode", "Decompress a .jiq stream");
  d->add_option("--model", dec.model, "checkpoint")->required();
  d->add_option("--input", dec.input, ".jiq stream")->required();
  d->add_option("--output", dec.output, "output image (.ppm for PPM, PNG otherwise)")->required();

  EvalArgs ev;
  auto* v = app.add_subcommand("eval", "Rate-distortion evaluation over a folder");
  v->add_option("--model", ev.model, "checkpoint")->required();
  v->add_option("--dataset", ev.dataset, "folder of .png/.ppm images")->required();
  v->add_option("--csv", ev.csv, "output CSV")->required();
  v->add_flag("--no-enhance", ev.no_enhance, "evaluate without the enhancement network");
  v->add_flag("--append", ev.append, "append rows to an existing CSV");

  BdrateArgs bd;
  auto* b = app.add_subcommand("bdrate", "BD-rate of TEST against ANCHOR");
  b->add_option("anchor", bd.anchor, "anchor CSV")->required();
  b->add_option("test", bd.test, "test CSV")->required();
  b->add_option("--metric", bd.metric, "quality axis")->check(CLI::IsMember({"psnr", "msssim"}));

  ToysetArgs toy;
  auto* y = app.add_subcommand("toyset", "Write synthetic images for experiments");
  y->add_option("--out", toy.out, "output folder")->required();
  y->add_option("--count", toy.count)->check(CLI::Range(1, 100000));
  y->add_option("--width", toy.width)->check(CLI::Range(1, 65535));
  y->add_option("--height", toy.height)->check(CLI::Range(1, 65535));
  y->add_option("--seed", toy.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return kExitUsage;
  }

  try {
    if (*t) return run_train(train);
    if (*e) return run_encode(enc);
    if (*d) return run_decode(dec);
    if (*v) return run_eval(ev);
    if (*b) return run_bdrate(bd);
    if (*y) return run_toyset(toy);
  } catch (const ConfigError& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kExitUsage;
  } catch (const FormatError& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kExitFormat;
  } catch (const ShapeError& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kExitFormat;
  } catch (const NumericError& ex) {
    std::cerr << "numeric failure: " << ex.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return kExitUsage;
}
