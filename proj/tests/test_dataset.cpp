#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "ntiqa/dataset.hpp"
#include "ntiqa/metrics.hpp"

using namespace ntiqa;
namespace fs = std::filesystem;

TEST_CASE("gradient base is darker at (0,0) than (31,31)") {
  for (uint64_t seed : {0ull, 1ull, 7ull, 42ull, 1000ull}) {
    Tensor img = generate_base(seed, BaseKind::kGradient);
    double m00 = 0.0, m31 = 0.0;
    for (int64_t c = 0; c < 3; ++c) {
      m00 += img.at3(c, 0, 0);
      m31 += img.at3(c, 31, 31);
    }
    CHECK(m00 / 3.0 < m31 / 3.0);
  }
}

TEST_CASE("base generation is deterministic") {
  for (auto kind : {BaseKind::kGradient, BaseKind::kChecker, BaseKind::kPerlinLike}) {
    CHECK(bitwise_equal(generate_base(11, kind), generate_base(11, kind)));
  }
}

TEST_CASE("checker has exactly two distinct values per channel") {
  Tensor img = generate_base(7, BaseKind::kChecker);
  for (int64_t c = 0; c < 3; ++c) {
    std::set<double> values;
    for (int64_t i = 0; i < 32; ++i) {
      for (int64_t j = 0; j < 32; ++j) values.insert(img.at3(c, i, j));
    }
    CHECK(values.size() == 2);
  }
}

TEST_CASE("base images stay in [0,1]") {
  for (auto kind : {BaseKind::kGradient, BaseKind::kChecker, BaseKind::kPerlinLike}) {
    for (uint64_t seed = 0; seed < 8; ++seed) {
      Tensor img = generate_base(seed, kind);
      for (int64_t i = 0; i < img.size(); ++i) {
        CHECK(img[i] >= 0.0);
        CHECK(img[i] <= 1.0);
      }
    }
  }
}

TEST_CASE("distort severity 0 is the identity") {
  Tensor img = generate_base(3, BaseKind::kPerlinLike);
  for (auto kind : {DistortKind::kGaussNoise, DistortKind::kGaussBlur,
                    DistortKind::kContrastCrush}) {
    CHECK(bitwise_equal(distort(img, kind, 0.0, 9), img));
  }
}

TEST_CASE("distort rejects severity outside [0,1]") {
  Tensor img = generate_base(3, BaseKind::kGradient);
  CHECK_THROWS_AS(distort(img, DistortKind::kGaussNoise, -0.1, 1), Error);
  CHECK_THROWS_AS(distort(img, DistortKind::kGaussNoise, 1.1, 1), Error);
}

TEST_CASE("noise severity scales the deviation") {
  Tensor img = generate_base(5, BaseKind::kPerlinLike);
  auto mad = [&](double severity) {
    Tensor d = distort(img, DistortKind::kGaussNoise, severity, 77);
    double s = 0.0;
    for (int64_t i = 0; i < img.size(); ++i) s += std::abs(d[i] - img[i]);
    return s / static_cast<double>(img.size());
  };
  CHECK(mad(1.0) > mad(0.2));
}

TEST_CASE("blur reduces SSIM below 1") {
  Tensor img = generate_base(6, BaseKind::kChecker);
  Tensor blurred = distort(img, DistortKind::kGaussBlur, 0.5, 0);
  CHECK(ssim(img, blurred) < 1.0);
}

TEST_CASE("distorted output stays in [0,1]") {
  Tensor img = generate_base(8, BaseKind::kGradient);
  for (auto kind : {DistortKind::kGaussNoise, DistortKind::kGaussBlur,
                    DistortKind::kContrastCrush}) {
    Tensor d = distort(img, kind, 1.0, 4);
    for (int64_t i = 0; i < d.size(); ++i) {
      CHECK(d[i] >= 0.0);
      CHECK(d[i] <= 1.0);
    }
  }
}

TEST_CASE("severity_to_mos endpoints and midpoint") {
  CHECK(severity_to_mos(0.0) == 100.0);
  CHECK(severity_to_mos(1.0) == 0.0);
  CHECK(severity_to_mos(0.25) == 75.0);
}

TEST_CASE("severity_to_mos strictly decreasing") {
  double prev = severity_to_mos(0.0);
  for (int k = 1; k <= 100; ++k) {
    double cur = severity_to_mos(k / 100.0);
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("normalize_mos matches the reference bounds") {
  CHECK(normalize_mos(3.42, 3.42, 92.43) == 0.0);
  CHECK(normalize_mos(92.43, 3.42, 92.43) == 100.0);
  CHECK(normalize_mos(47.925, 3.42, 92.43) == doctest::Approx(50.0).epsilon(1e-12));
  CHECK_THROWS_AS(normalize_mos(10.0, 5.0, 5.0), Error);
  CHECK_THROWS_AS(normalize_mos(10.0, 6.0, 5.0), Error);
}

TEST_CASE("normalize_mos is affine and order-preserving") {
  double lo = 3.42, hi = 92.43;
  double a = normalize_mos(20.0, lo, hi);
  double b = normalize_mos(40.0, lo, hi);
  double c = normalize_mos(60.0, lo, hi);
  CHECK(a < b);
  CHECK(b < c);
  CHECK(c - b == doctest::Approx(b - a).epsilon(1e-9));
}

TEST_CASE("build_dataset splits 80/20 and is deterministic") {
  Dataset d = build_dataset(100, 5);
  CHECK(d.samples.size() == 100);
  CHECK(d.indices(Split::kTrain).size() == 80);
  CHECK(d.indices(Split::kTest).size() == 20);

  Dataset d2 = build_dataset(100, 5);
  for (size_t i = 0; i < d.samples.size(); ++i) {
    CHECK(bitwise_equal(d.samples[i].image, d2.samples[i].image));
    CHECK(d.samples[i].mos == d2.samples[i].mos);
    CHECK(d.samples[i].split == d2.samples[i].split);
  }

  Dataset d3 = build_dataset(10, 1);
  CHECK(d3.indices(Split::kTrain).size() == 8);
  CHECK(d3.indices(Split::kTest).size() == 2);
  CHECK_THROWS_AS(build_dataset(9, 1), Error);
}

TEST_CASE("per-kind distortion counts stay within 10% of n/3") {
  Dataset d = build_dataset(625, 1);
  int64_t counts[3] = {0, 0, 0};
  for (const Sample& s : d.samples) counts[static_cast<int>(s.kind)]++;
  for (int k = 0; k < 3; ++k) {
    CHECK(std::abs(static_cast<double>(counts[k]) - 625.0 / 3.0) <= 62.5);
  }
}

TEST_CASE("mos is exactly severity_to_mos and splits cover all samples") {
  Dataset d = build_dataset(50, 9);
  for (const Sample& s : d.samples) {
    CHECK(s.mos == severity_to_mos(s.severity));
  }
  auto train = d.indices(Split::kTrain);
  auto test = d.indices(Split::kTest);
  CHECK(train.size() + test.size() == d.samples.size());
  std::set<size_t> seen(train.begin(), train.end());
  for (size_t t : test) CHECK(seen.count(t) == 0);
}

TEST_CASE("label noise flag perturbs MOS but stays in range") {
  Dataset d = build_dataset(30, 4, 5.0);
  bool any_off = false;
  for (const Sample& s : d.samples) {
    if (s.mos != severity_to_mos(s.severity)) any_off = true;
    CHECK(s.mos >= 0.0);
    CHECK(s.mos <= 100.0);
  }
  CHECK(any_off);
}

TEST_CASE("dataset round-trips through the on-disk format") {
  std::string dir = (fs::temp_directory_path() / "ntiqa_test_dataset").string();
  fs::remove_all(dir);
  Dataset d = build_dataset(12, 21);
  save_dataset(d, dir);
  Dataset back = load_dataset(dir);
  REQUIRE(back.samples.size() == d.samples.size());
  for (size_t i = 0; i < d.samples.size(); ++i) {
    CHECK(bitwise_equal(back.samples[i].image, d.samples[i].image));
    CHECK(back.samples[i].mos == d.samples[i].mos);
    CHECK(back.samples[i].severity == d.samples[i].severity);
    CHECK(back.samples[i].kind == d.samples[i].kind);
    CHECK(back.samples[i].split == d.samples[i].split);
  }
  fs::remove_all(dir);
}
