#include "ntiqa/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "ntiqa/csv.hpp"
#include "ntiqa/rng.hpp"
#include "ntiqa/serialize.hpp"

namespace fs = std::filesystem;

namespace ntiqa {

namespace {

constexpr int64_t kChannels = 3;
constexpr int64_t kSide = 32;
constexpr double kTwoPi = 6.283185307179586476925286766559;

Tensor base_gradient(Rng& rng) {
  Tensor img({kChannels, kSide, kSide});
  // Shared ripple frequency, per-channel ramp and phase. The ramp keeps
  // pixel (0,0) strictly darker than (31,31) for every seed.
  double fx = 2.0 + static_cast<double>(rng.index(4));
  double fy = 2.0 + static_cast<double>(rng.index(4));
  for (int64_t c = 0; c < kChannels; ++c) {
    double lo = 0.12 + 0.06 * rng.uniform();
    double hi = 0.82 + 0.06 * rng.uniform();
    double phase = kTwoPi * rng.uniform();
    for (int64_t i = 0; i < kSide; ++i) {
      for (int64_t j = 0; j < kSide; ++j) {
        double ramp = static_cast<double>(i + j) / static_cast<double>(2 * (kSide - 1));
        double ripple = 0.05 * std::sin(kTwoPi * (fx * j + fy * i) / kSide + phase);
        img.at3(c, i, j) = lo + (hi - lo) * ramp + ripple;
      }
    }
  }
  return img;
}

Tensor base_checker(Rng& rng) {
  Tensor img({kChannels, kSide, kSide});
  const int64_t cells[] = {2, 4, 8};
  int64_t cell = cells[rng.index(3)];
  for (int64_t c = 0; c < kChannels; ++c) {
    double lo = 0.10 + 0.15 * rng.uniform();
    double hi = 0.70 + 0.20 * rng.uniform();
    for (int64_t i = 0; i < kSide; ++i) {
      for (int64_t j = 0; j < kSide; ++j) {
        bool odd = ((i / cell) + (j / cell)) % 2 != 0;
        img.at3(c, i, j) = odd ? hi : lo;
      }
    }
  }
  return img;
}

// Value noise: bilinear interpolation of random lattices at a few octaves.
Tensor base_perlin_like(Rng& rng) {
  Tensor img({kChannels, kSide, kSide});
  const int64_t octaves[] = {4, 8, 16};
  const double weights[] = {0.5, 0.3, 0.2};
  for (int64_t c = 0; c < kChannels; ++c) {
    std::vector<double> acc(static_cast<size_t>(kSide * kSide), 0.0);
    for (int o = 0; o < 3; ++o) {
      int64_t g = octaves[o];
      std::vector<double> lattice(static_cast<size_t>((g + 1) * (g + 1)));
      for (double& v : lattice) v = rng.uniform();
      for (int64_t i = 0; i < kSide; ++i) {
        double ty = static_cast<double>(i) * g / kSide;
        int64_t y0 = static_cast<int64_t>(ty);
        double fy = ty - static_cast<double>(y0);
        fy = fy * fy * (3.0 - 2.0 * fy);
        for (int64_t j = 0; j < kSide; ++j) {
          double tx = static_cast<double>(j) * g / kSide;
          int64_t x0 = static_cast<int64_t>(tx);
          double fxv = tx - static_cast<double>(x0);
          fxv = fxv * fxv * (3.0 - 2.0 * fxv);
          double v00 = lattice[static_cast<size_t>(y0 * (g + 1) + x0)];
          double v01 = lattice[static_cast<size_t>(y0 * (g + 1) + x0 + 1)];
          double v10 = lattice[static_cast<size_t>((y0 + 1) * (g + 1) + x0)];
          double v11 = lattice[static_cast<size_t>((y0 + 1) * (g + 1) + x0 + 1)];
          double top = v00 + (v01 - v00) * fxv;
          double bot = v10 + (v11 - v10) * fxv;
          acc[static_cast<size_t>(i * kSide + j)] += weights[o] * (top + (bot - top) * fy);
        }
      }
    }
    double lo = acc[0], hi = acc[0];
    for (double v : acc) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    double span = hi > lo ? hi - lo : 1.0;
    for (int64_t i = 0; i < kSide * kSide; ++i) {
      img[c * kSide * kSide + i] = 0.1 + 0.8 * (acc[static_cast<size_t>(i)] - lo) / span;
    }
  }
  return img;
}

Tensor gauss_blur(const Tensor& image, double severity) {
  double sigma = 2.5 * severity;
  int64_t radius = std::min<int64_t>(static_cast<int64_t>(std::ceil(3.0 * sigma)), kSide - 1);
  if (radius < 1) radius = 1;
  std::vector<double> kernel(static_cast<size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int64_t k = -radius; k <= radius; ++k) {
    double v = std::exp(-0.5 * (static_cast<double>(k) * k) / (sigma * sigma));
    kernel[static_cast<size_t>(k + radius)] = v;
    sum += v;
  }
  for (double& v : kernel) v /= sum;

  int64_t c = image.shape()[0], h = image.shape()[1], w = image.shape()[2];
  Tensor mid(image.shape());
  // horizontal pass, clamp-to-edge
  for (int64_t ci = 0; ci < c; ++ci) {
    for (int64_t i = 0; i < h; ++i) {
      for (int64_t j = 0; j < w; ++j) {
        double s = 0.0;
        for (int64_t k = -radius; k <= radius; ++k) {
          int64_t jj = std::clamp<int64_t>(j + k, 0, w - 1);
          s += kernel[static_cast<size_t>(k + radius)] * image.at3(ci, i, jj);
        }
        mid.at3(ci, i, j) = s;
      }
    }
  }
  Tensor out(image.shape());
  for (int64_t ci = 0; ci < c; ++ci) {
    for (int64_t i = 0; i < h; ++i) {
      for (int64_t j = 0; j < w; ++j) {
        double s = 0.0;
        for (int64_t k = -radius; k <= radius; ++k) {
          int64_t ii = std::clamp<int64_t>(i + k, 0, h - 1);
          s += kernel[static_cast<size_t>(k + radius)] * mid.at3(ci, ii, j);
        }
        out.at3(ci, i, j) = s;
      }
    }
  }
  return out;
}

}  // namespace

std::string base_kind_name(BaseKind kind) {
  switch (kind) {
    case BaseKind::kGradient: return "GRADIENT";
    case BaseKind::kChecker: return "CHECKER";
    case BaseKind::kPerlinLike: return "PERLIN-LIKE";
  }
  return "?";
}

std::string distort_kind_name(DistortKind kind) {
  switch (kind) {
    case DistortKind::kGaussNoise: return "GAUSS-NOISE";
    case DistortKind::kGaussBlur: return "GAUSS-BLUR";
    case DistortKind::kContrastCrush: return "CONTRAST-CRUSH";
  }
  return "?";
}

DistortKind parse_distort_kind(const std::string& name) {
  if (name == "GAUSS-NOISE") return DistortKind::kGaussNoise;
  if (name == "GAUSS-BLUR") return DistortKind::kGaussBlur;
  if (name == "CONTRAST-CRUSH") return DistortKind::kContrastCrush;
  throw Error("unknown distortion kind '" + name + "'");
}

std::string split_name(Split split) {
  return split == Split::kTrain ? "TRAIN" : "TEST";
}

Split parse_split(const std::string& name) {
  if (name == "TRAIN") return Split::kTrain;
  if (name == "TEST") return Split::kTest;
  throw Error("unknown split '" + name + "'");
}

std::vector<size_t> Dataset::indices(Split split) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].split == split) out.push_back(i);
  }
  return out;
}

Tensor generate_base(uint64_t seed, BaseKind kind) {
  Rng rng(mix_seed(seed, static_cast<uint64_t>(kind) + 0xBA5E));
  switch (kind) {
    case BaseKind::kGradient: return base_gradient(rng);
    case BaseKind::kChecker: return base_checker(rng);
    case BaseKind::kPerlinLike: return base_perlin_like(rng);
  }
  throw Error("unknown base kind");
}

Tensor distort(const Tensor& image, DistortKind kind, double severity,
               uint64_t seed) {
  if (!(severity >= 0.0 && severity <= 1.0)) {
    throw Error("distort: severity " + fmt_double(severity) + " outside [0,1]");
  }
  if (severity == 0.0) return image;
  switch (kind) {
    case DistortKind::kGaussNoise: {
      Rng rng(mix_seed(seed, 0xD157));
      Tensor out(image.shape());
      double amp = 0.3 * severity;
      for (int64_t i = 0; i < image.size(); ++i) {
        out[i] = image[i] + amp * rng.gaussian();
      }
      return clamp01(out);
    }
    case DistortKind::kGaussBlur:
      return clamp01(gauss_blur(image, severity));
    case DistortKind::kContrastCrush: {
      Tensor out(image.shape());
      double k = 1.0 - 0.9 * severity;
      for (int64_t i = 0; i < image.size(); ++i) {
        out[i] = 0.5 + (image[i] - 0.5) * k;
      }
      return clamp01(out);
    }
  }
  throw Error("unknown distortion kind");
}

double severity_to_mos(double severity) {
  if (!(severity >= 0.0 && severity <= 1.0)) {
    throw Error("severity_to_mos: severity outside [0,1]");
  }
  return 100.0 * (1.0 - severity);
}

double normalize_mos(double raw, double s_min, double s_max) {
  if (!(s_max > s_min)) {
    throw Error("normalize_mos: s_max " + fmt_double(s_max) +
                " must exceed s_min " + fmt_double(s_min));
  }
  return (raw - s_min) / (s_max - s_min) * 100.0;
}

Dataset build_dataset(int64_t n, uint64_t seed, double mos_noise_sigma) {
  if (n < 10) throw Error("build_dataset: need at least 10 samples, got " + std::to_string(n));
  Dataset ds;
  ds.seed = seed;
  ds.samples.reserve(static_cast<size_t>(n));
  for (int64_t id = 0; id < n; ++id) {
    Rng rng(mix_seed(seed, static_cast<uint64_t>(id), 0x5A));
    Sample s;
    s.id = id;
    // Cycled kinds: exact per-kind balance, all base x distortion combos.
    auto base = static_cast<BaseKind>((id / 3) % 3);
    s.kind = static_cast<DistortKind>(id % 3);
    s.severity = rng.uniform();
    Tensor img = generate_base(mix_seed(seed, static_cast<uint64_t>(id), 0xB0), base);
    s.image = distort(img, s.kind, s.severity, mix_seed(seed, static_cast<uint64_t>(id), 0xD0));
    s.mos = severity_to_mos(s.severity);
    if (mos_noise_sigma > 0.0) {
      s.mos = std::clamp(s.mos + mos_noise_sigma * rng.gaussian(), 0.0, 100.0);
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "images/%05lld.bin", static_cast<long long>(id));
    s.file = buf;
    ds.samples.push_back(std::move(s));
  }

  std::vector<size_t> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), size_t{0});
  Rng split_rng(mix_seed(seed, 0x5917));
  split_rng.shuffle(order);
  auto train_count = static_cast<size_t>(std::llround(0.8 * static_cast<double>(n)));
  for (size_t k = 0; k < order.size(); ++k) {
    ds.samples[order[k]].split = k < train_count ? Split::kTrain : Split::kTest;
  }
  return ds;
}

void save_dataset(const Dataset& dataset, const std::string& dir) {
  fs::create_directories(fs::path(dir) / "images");
  CsvWriter manifest((fs::path(dir) / "manifest.csv").string(),
                     "id,kind,severity,mos,split,file");
  for (const Sample& s : dataset.samples) {
    save_tensor((fs::path(dir) / s.file).string(), "image", s.image);
    manifest.row({std::to_string(s.id), distort_kind_name(s.kind),
                  fmt_double(s.severity), fmt_double(s.mos),
                  split_name(s.split), s.file});
  }
  manifest.close();
}

Dataset load_dataset(const std::string& dir) {
  std::string path = (fs::path(dir) / "manifest.csv").string();
  CsvTable table = read_csv(path);
  size_t ci = table.column("id", path);
  size_t ck = table.column("kind", path);
  size_t cs = table.column("severity", path);
  size_t cm = table.column("mos", path);
  size_t cp = table.column("split", path);
  size_t cf = table.column("file", path);

  Dataset ds;
  for (const auto& row : table.rows) {
    Sample s;
    s.id = parse_int(row[ci], path);
    s.kind = parse_distort_kind(row[ck]);
    s.severity = parse_double(row[cs], path);
    s.mos = parse_double(row[cm], path);
    s.split = parse_split(row[cp]);
    s.file = row[cf];
    s.image = load_tensor((fs::path(dir) / s.file).string(), "image");
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.empty()) throw Error(path + ": dataset manifest has no samples");
  return ds;
}

}  // namespace ntiqa
