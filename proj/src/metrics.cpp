#include "jiq/metrics.hpp"

#include <cmath>
// Boost 1.74 pchip.hpp calls isnan unqualified.
using std::isnan;
#include <boost/math/interpolators/pchip.hpp>
#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "jiq/codec.hpp"
#include "jiq/error.hpp"
#include "jiq/ops.hpp"
#include "jiq/parallel.hpp"

namespace jiq {

namespace {

template <typename T>
std::vector<T>* grad_of(Node<T>& n, std::size_t i) {
  auto& in = n.inputs[i];
  return (in && in->requires_grad) ? &in->grad_buffer() : nullptr;
}

void require_same_extent(int wa, int ha, int wb, int hb) {
  if (wa != wb || ha != hb) {
    throw ShapeError("image extents differ: " + std::to_string(wa) + "x" + std::to_string(ha) + " vs " +
                     std::to_string(wb) + "x" + std::to_string(hb));
  }
}

Tensor<double> planar(const Rgb8Image& img) {
  const std::size_t plane = static_cast<std::size_t>(img.width) * img.height;
  std::vector<double> v(3 * plane);
  for (std::size_t i = 0; i < plane; ++i) {
    for (int c = 0; c < 3; ++c) v[c * plane + i] = img.pixels[3 * i + c];
  }
  return Tensor<double>::constant({3, img.height, img.width}, std::move(v));
}

// Row filter (axis 2) or column filter (axis 1) with the SSIM taps, no padding.
template <typename T>
Tensor<T> filter_axis(const Tensor<T>& x, int axis) {
  static const std::vector<double> taps = ssim_taps();
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int ho = axis == 1 ? h - kSsimWindow + 1 : h;
  const int wo = axis == 2 ? w - kSsimWindow + 1 : w;
  if (ho < 1 || wo < 1) throw ShapeError("gaussian_filter_valid: input smaller than the window");
  const std::size_t step = axis == 2 ? 1 : static_cast<std::size_t>(w);
  std::vector<T> out(static_cast<std::size_t>(c) * ho * wo, T(0));
  const T* in = x.data();
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < ho; ++y) {
      for (int xx = 0; xx < wo; ++xx) {
        const T* p = in + (static_cast<std::size_t>(ch) * h + y) * w + xx;
        T s = 0;
        for (int k = 0; k < kSsimWindow; ++k) s += static_cast<T>(taps[k]) * p[k * step];
        out[(static_cast<std::size_t>(ch) * ho + y) * wo + xx] = s;
      }
    }
  }
  return Tensor<T>::from_op(
      {c, ho, wo}, std::move(out), {x},
      [=](Node<T>& n) {
        auto* d = grad_of(n, 0);
        if (!d) return;
        for (int ch = 0; ch < c; ++ch) {
          for (int y = 0; y < ho; ++y) {
            for (int xx = 0; xx < wo; ++xx) {
              const T g = n.grad[(static_cast<std::size_t>(ch) * ho + y) * wo + xx];
              T* p = d->data() + (static_cast<std::size_t>(ch) * h + y) * w + xx;
              for (int k = 0; k < kSsimWindow; ++k) p[k * step] += static_cast<T>(taps[k]) * g;
            }
          }
        }
      },
      "gaussian_filter_valid");
}

template <typename T>
Tensor<T> single_channel_ms_ssim(Tensor<T> x, Tensor<T> y, int scales) {
  const T c1 = static_cast<T>(std::pow(kSsimK1 * 255.0, 2));
  const T c2 = static_cast<T>(std::pow(kSsimK2 * 255.0, 2));
  double wsum = 0.0;
  for (int s = 0; s < scales; ++s) wsum += kMsSsimWeights[s];
  Tensor<T> result;
  for (int s = 0; s < scales; ++s) {
    if (s > 0) {
      x = avg_pool2(x);
      y = avg_pool2(y);
    }
    auto mux = gaussian_filter_valid(x);
    auto muy = gaussian_filter_valid(y);
    auto mxx = square(mux), myy = square(muy), mxy = mul(mux, muy);
    auto sxx = sub(gaussian_filter_valid(square(x)), mxx);
    auto syy = sub(gaussian_filter_valid(square(y)), myy);
    auto sxy = sub(gaussian_filter_valid(mul(x, y)), mxy);
    auto cs_map = div(add_scalar(scale(sxy, T(2)), c2), add_scalar(add(sxx, syy), c2));
    Tensor<T> value;
    if (s + 1 < scales) {
      value = mean(cs_map);
    } else {
      auto l_map = div(add_scalar(scale(mxy, T(2)), c1), add_scalar(add(mxx, myy), c1));
      value = mean(mul(l_map, cs_map));
    }
    auto term = pow_scalar(value, static_cast<T>(kMsSsimWeights[s] / wsum));
    result = result.defined() ? mul(result, term) : term;
  }
  return result;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, const std::filesystem::path& path) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError(path.string() + ": not a number: '" + s + "'");
  }
}

constexpr const char* kCsvHeader = "image,bpp,psnr_db,msssim,msssim_db";

}  // namespace

double psnr(const Rgb8Image& a, const Rgb8Image& b) {
  require_same_extent(a.width, a.height, b.width, b.height);
  double se = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - b.pixels[i];
    se += d * d;
  }
  if (se == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(255.0 * 255.0 / (se / static_cast<double>(a.pixels.size())));
}

double psnr(const ImageTensor& a, const ImageTensor& b) { return psnr(to_rgb8(a), to_rgb8(b)); }

int ms_ssim_scales(int width, int height) {
  const int m = std::min(width, height);
  if (m < 16) throw ShapeError("MS-SSIM needs both extents >= 16, got " + std::to_string(width) + "x" +
                               std::to_string(height));
  int s = 0;
  while (s < 5 && (m >> (s + 1)) >= 8) ++s;  // floor(log2(m / 8)) capped at 5
  return s;
}

std::vector<double> ssim_taps() {
  std::vector<double> t(kSsimWindow);
  const int r = kSsimWindow / 2;
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    t[i] = std::exp(-static_cast<double>((i - r) * (i - r)) / (2.0 * kSsimSigma * kSsimSigma));
    sum += t[i];
  }
  for (auto& v : t) v /= sum;
  return t;
}

template <typename T>
Tensor<T> gaussian_filter_valid(const Tensor<T>& x) {
  if (x.rank() != 3) throw ShapeError("gaussian_filter_valid expects [C,H,W], got " + shape_str(x.shape()));
  return filter_axis(filter_axis(x, 2), 1);
}

template <typename T>
Tensor<T> ms_ssim(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape() || a.rank() != 3) {
    throw ShapeError("ms_ssim: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const int scales = ms_ssim_scales(a.dim(2), a.dim(1));
  std::vector<Tensor<T>> per_channel;
  for (int c = 0; c < a.dim(0); ++c) {
    per_channel.push_back(reshape(single_channel_ms_ssim(slice(a, c, c + 1), slice(b, c, c + 1), scales), {1}));
  }
  return mean(concat(per_channel));
}

double ms_ssim(const Rgb8Image& a, const Rgb8Image& b) {
  require_same_extent(a.width, a.height, b.width, b.height);
  NoGradGuard no_grad;
  return ms_ssim(planar(a), planar(b)).item();
}

double ms_ssim(const ImageTensor& a, const ImageTensor& b) { return ms_ssim(to_rgb8(a), to_rgb8(b)); }

double msssim_db(double v) { return -10.0 * std::log10(1.0 - v); }

double bd_rate(std::vector<RdSample> anchor, std::vector<RdSample> test) {
  using Interp = boost::math::interpolators::pchip<std::vector<double>>;
  auto prepare = [](std::vector<RdSample>& curve, const char* which) {
    if (curve.size() < 4) throw FormatError(std::string("bd_rate: ") + which + " curve needs at least 4 points");
    for (const auto& p : curve) {
      if (!(p.rate > 0.0) || !std::isfinite(p.rate) || !std::isfinite(p.quality)) {
        throw FormatError(std::string("bd_rate: ") + which + " curve has a non-positive or non-finite point");
      }
    }
    std::sort(curve.begin(), curve.end(), [](const RdSample& a, const RdSample& b) { return a.rate < b.rate; });
    for (std::size_t i = 1; i < curve.size(); ++i) {
      if (!(curve[i].rate > curve[i - 1].rate) || !(curve[i].quality > curve[i - 1].quality)) {
        throw FormatError(std::string("bd_rate: ") + which + " curve is not strictly monotonic");
      }
    }
  };
  prepare(anchor, "anchor");
  prepare(test, "test");
  const double lo = std::max(anchor.front().quality, test.front().quality);
  const double hi = std::min(anchor.back().quality, test.back().quality);
  if (!(hi > lo)) throw FormatError("bd_rate: curves have no quality overlap");

  auto integral = [lo, hi](const std::vector<RdSample>& curve) {
    std::vector<double> q, r;
    for (const auto& p : curve) {
      q.push_back(p.quality);
      r.push_back(std::log10(p.rate));
    }
    std::vector<double> knots{lo};
    for (double v : q) {
      if (v > lo && v < hi) knots.push_back(v);
    }
    knots.push_back(hi);
    Interp f(std::move(q), std::move(r));
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
      total += boost::math::quadrature::gauss<double, 4>::integrate(f, knots[i], knots[i + 1]);
    }
    return total;
  };
  const double avg = (integral(test) - integral(anchor)) / (hi - lo);
  return (std::pow(10.0, avg) - 1.0) * 100.0;
}

RdRow average_row(const std::vector<RdRow>& rows) {
  RdRow avg;
  avg.image = kAverageRow;
  if (rows.empty()) return avg;
  for (const auto& r : rows) {
    avg.bpp += r.bpp;
    avg.psnr_db += r.psnr_db;
    avg.msssim += r.msssim;
    avg.msssim_db += r.msssim_db;
  }
  const double n = static_cast<double>(rows.size());
  avg.bpp /= n;
  avg.psnr_db /= n;
  avg.msssim /= n;
  avg.msssim_db /= n;
  return avg;
}

template <typename T>
std::vector<RdRow> rd_eval(const Model<T>& model, const std::filesystem::path& dir, bool enhance) {
  const auto files = list_images(dir);
  if (files.empty()) throw FormatError("no .png or .ppm images in " + dir.string());
  std::vector<RdRow> rows(files.size());
  parallel_for(files.size(), [&](std::size_t i) {
    const Rgb8Image original = read_image(files[i]);
    const auto enc = encode_image(to_tensor(original), model, enhance);
    const auto bytes = enc.stream.serialize();
    const Rgb8Image decoded = to_rgb8(decode_image(Bitstream::parse(bytes), model).image);
    RdRow& r = rows[i];
    r.image = files[i].filename().string();
    r.bpp = bits_per_pixel(bytes.size(), original.width, original.height);
    r.psnr_db = psnr(original, decoded);
    r.msssim = ms_ssim(original, decoded);
    r.msssim_db = msssim_db(r.msssim);
  });
  rows.push_back(average_row(rows));
  return rows;
}

void write_rd_csv(const std::filesystem::path& path, const std::vector<RdRow>& rows, bool append) {
  const bool header = !append || !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  if (header) out << kCsvHeader << '\n';
  out << std::setprecision(12);
  for (const auto& r : rows) {
    if (r.image.find(',') != std::string::npos) throw FormatError("image name contains a comma: " + r.image);
    out << r.image << ',' << r.bpp << ',' << r.psnr_db << ',' << r.msssim << ',' << r.msssim_db << '\n';
  }
  if (!out) throw FormatError("write failed: " + path.string());
}

std::vector<RdRow> read_rd_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw FormatError(path.string() + ": expected header '" + kCsvHeader + "'");
  }
  std::vector<RdRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line == kCsvHeader) continue;
    auto cells = split_csv(line);
    if (cells.size() != 5) throw FormatError(path.string() + ": expected 5 columns in '" + line + "'");
    rows.push_back({cells[0], parse_number(cells[1], path), parse_number(cells[2], path),
                    parse_number(cells[3], path), parse_number(cells[4], path)});
  }
  return rows;
}

std::vector<RdSample> rd_curve(const std::vector<RdRow>& rows, QualityMetric metric) {
  std::vector<const RdRow*> averages, images;
  for (const auto& r : rows) (r.image == kAverageRow ? averages : images).push_back(&r);
  const auto& chosen = averages.size() >= 4 ? averages : images;
  std::vector<RdSample> out;
  for (const RdRow* r : chosen) out.push_back({r->bpp, metric == QualityMetric::kPsnr ? r->psnr_db : r->msssim_db});
  return out;
}

template Tensor<float> gaussian_filter_valid(const Tensor<float>&);
template Tensor<double> gaussian_filter_valid(const Tensor<double>&);
template Tensor<float> ms_ssim(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> ms_ssim(const Tensor<double>&, const Tensor<double>&);
template std::vector<RdRow> rd_eval(const Model<float>&, const std::filesystem::path&, bool);
template std::vector<RdRow> rd_eval(const Model<double>&, const std::filesystem::path&, bool);

}  // namespace jiq
