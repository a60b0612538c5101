#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ntiqa/tensor.hpp"

namespace ntiqa {

enum class BaseKind { kGradient, kChecker, kPerlinLike };
enum class DistortKind { kGaussNoise, kGaussBlur, kContrastCrush };
enum class Split { kTrain, kTest };

std::string base_kind_name(BaseKind kind);
std::string distort_kind_name(DistortKind kind);
DistortKind parse_distort_kind(const std::string& name);
std::string split_name(Split split);
Split parse_split(const std::string& name);

// One synthetic sample: a 3x32x32 image in [0,1] with its ground-truth MOS
// and distortion metadata.
struct Sample {
  int64_t id = 0;
  Tensor image;
  double mos = 0.0;
  DistortKind kind = DistortKind::kGaussNoise;
  double severity = 0.0;
  Split split = Split::kTrain;
  std::string file;
};

struct Dataset {
  uint64_t seed = 0;
  std::vector<Sample> samples;

  std::vector<size_t> indices(Split split) const;
};

// Deterministic procedural base image, 3x32x32 in [0,1].
Tensor generate_base(uint64_t seed, BaseKind kind);

// severity 0 returns the input unchanged; output clipped to [0,1].
Tensor distort(const Tensor& image, DistortKind kind, double severity,
               uint64_t seed);

// mos = 100 * (1 - severity), strictly decreasing.
double severity_to_mos(double severity);

// (raw - s_min) / (s_max - s_min) * 100.
double normalize_mos(double raw, double s_min, double s_max);

// n samples with uniform severities, base/distortion kinds cycled for even
// coverage, 80/20 train/test split by seeded shuffle. mos_noise_sigma adds
// optional Gaussian label noise (default off: MOS is exact).
Dataset build_dataset(int64_t n, uint64_t seed, double mos_noise_sigma = 0.0);

// Directory layout: manifest.csv (id,kind,severity,mos,split,file) plus one
// tensor-container file per sample under images/.
void save_dataset(const Dataset& dataset, const std::string& dir);
Dataset load_dataset(const std::string& dir);

}  // namespace ntiqa
