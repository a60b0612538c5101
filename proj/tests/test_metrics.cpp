#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ntiqa/dataset.hpp"
#include "ntiqa/metrics.hpp"
#include "ntiqa/rng.hpp"

using namespace ntiqa;

namespace {

std::vector<double> rand_vec(size_t n, Rng& rng, double lo = 0.0, double hi = 100.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Brute-force rank of v[i]: 1 + number of strictly smaller elements
// (valid for distinct values only).
std::vector<double> brute_ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (size_t i = 0; i < v.size(); ++i) {
    int smaller = 0;
    for (size_t j = 0; j < v.size(); ++j) {
      if (v[j] < v[i]) ++smaller;
    }
    r[i] = smaller + 1.0;
  }
  return r;
}

double oracle_srocc(const std::vector<double>& a, const std::vector<double>& b) {
  auto ra = brute_ranks(a);
  auto rb = brute_ranks(b);
  double sd2 = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = ra[i] - rb[i];
    sd2 += d * d;
  }
  double n = static_cast<double>(a.size());
  return 1.0 - 6.0 * sd2 / (n * (n * n - 1.0));
}

double oracle_krocc(const std::vector<double>& a, const std::vector<double>& b) {
  int64_t con = 0, dis = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    for (size_t j = i + 1; j < a.size(); ++j) {
      double p = (a[i] - a[j]) * (b[i] - b[j]);
      if (p > 0) ++con;
      if (p < 0) ++dis;
    }
  }
  double n = static_cast<double>(a.size());
  return 2.0 * static_cast<double>(con - dis) / (n * (n - 1.0));
}

}  // namespace

TEST_CASE("rmse basics") {
  CHECK(rmse({{1, 2, 3}, {1, 2, 3}}) == 0.0);
  CHECK(rmse({{0, 0}, {3, 4}}) == doctest::Approx(std::sqrt(12.5)).epsilon(1e-15));
  CHECK_THROWS_AS(rmse({{}, {}}), Error);
  CHECK_THROWS_AS(rmse({{1, 2}, {1}}), Error);
}

TEST_CASE("rmse matches direct recomputation on random vectors") {
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    size_t n = 2 + rng.index(40);
    auto a = rand_vec(n, rng);
    auto b = rand_vec(n, rng);
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    double expect = std::sqrt(s / static_cast<double>(n));
    CHECK(std::abs(rmse({a, b}) - expect) <= 1e-12);
  }
}

TEST_CASE("rmse symmetry") {
  Rng rng(4);
  auto a = rand_vec(9, rng);
  auto b = rand_vec(9, rng);
  CHECK(rmse({a, b}) == rmse({b, a}));
}

TEST_CASE("srocc endpoints") {
  CHECK(srocc({{1, 2, 3, 4}, {10, 20, 30, 40}}) == 1.0);
  CHECK(srocc({{1, 2, 3, 4}, {40, 30, 20, 10}}) == -1.0);
  CHECK_THROWS_AS(srocc({{1, 1, 1}, {1, 2, 3}}), DegenerateInput);
}

TEST_CASE("srocc and krocc match exhaustive oracles on all permutation pairs") {
  for (size_t n = 2; n <= 6; ++n) {
    std::vector<double> base(n);
    std::iota(base.begin(), base.end(), 1.0);
    std::vector<double> pa = base;
    do {
      std::vector<double> pb = base;
      do {
        CHECK(srocc({pa, pb}) == oracle_srocc(pa, pb));
        CHECK(krocc({pa, pb}) == oracle_krocc(pa, pb));
      } while (std::next_permutation(pb.begin(), pb.end()));
    } while (std::next_permutation(pa.begin(), pa.end()));
  }
}

TEST_CASE("srocc tie handling reduces to the closed form when tie-free") {
  Rng rng(8);
  for (int t = 0; t < 50; ++t) {
    auto a = rand_vec(12, rng);
    auto b = rand_vec(12, rng);
    CHECK(srocc({a, b}) == doctest::Approx(oracle_srocc(a, b)).epsilon(1e-14));
  }
  // with ties: Pearson of average ranks
  std::vector<double> ta{1, 2, 2, 3};
  std::vector<double> tb{10, 20, 30, 40};
  auto ranks = average_ranks(ta);
  CHECK(ranks[1] == 2.5);
  CHECK(ranks[2] == 2.5);
  double v = srocc({ta, tb});
  CHECK(v > 0.9);
  CHECK(v < 1.0);
}

TEST_CASE("rank correlations are invariant under monotone transforms") {
  Rng rng(12);
  auto a = rand_vec(15, rng);
  auto b = rand_vec(15, rng);
  auto monotone = [](const std::vector<double>& v) {
    std::vector<double> out(v.size());
    for (size_t i = 0; i < v.size(); ++i) out[i] = std::exp(v[i] / 50.0) + 3.0;
    return out;
  };
  CHECK(srocc({a, b}) == doctest::Approx(srocc({monotone(a), b})).epsilon(1e-12));
  CHECK(krocc({a, b}) == krocc({monotone(a), monotone(b)}));
}

TEST_CASE("krocc hand count") {
  CHECK(krocc({{1, 2, 3}, {1, 3, 2}}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(krocc({{1, 2, 3}, {3, 7, 9}}) == 1.0);
  CHECK_THROWS_AS(krocc({{2, 2}, {1, 2}}), DegenerateInput);
}

TEST_CASE("plcc affine invariance and sign flip") {
  Rng rng(30);
  auto a = rand_vec(20, rng);
  std::vector<double> affine(a.size()), neg(a.size());
  for (size_t i = 0; i < a.size(); ++i) {
    affine[i] = 2.0 * a[i] + 3.0;
    neg[i] = -a[i];
  }
  CHECK(plcc({a, affine}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(plcc({a, neg}) == doctest::Approx(-1.0).epsilon(1e-12));
  auto b = rand_vec(20, rng);
  std::vector<double> nb(b.size());
  for (size_t i = 0; i < b.size(); ++i) nb[i] = -b[i];
  CHECK(plcc({a, b}) == doctest::Approx(-plcc({a, nb})).epsilon(1e-12));
}

TEST_CASE("plcc matches the covariance formula") {
  Rng rng(31);
  for (int t = 0; t < 100; ++t) {
    size_t n = 3 + rng.index(30);
    auto a = rand_vec(n, rng);
    auto b = rand_vec(n, rng);
    double ma = 0, mb = 0;
    for (size_t i = 0; i < n; ++i) {
      ma += a[i];
      mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double cov = 0, va = 0, vb = 0;
    for (size_t i = 0; i < n; ++i) {
      cov += (a[i] - ma) * (b[i] - mb);
      va += (a[i] - ma) * (a[i] - ma);
      vb += (b[i] - mb) * (b[i] - mb);
    }
    double expect = cov / std::sqrt(va * vb);
    CHECK(std::abs(plcc({a, b}) - expect) <= 1e-12);
  }
  CHECK_THROWS_AS(plcc({{5, 5, 5}, {1, 2, 3}}), DegenerateInput);
}

TEST_CASE("r_robustness hand case and clamp") {
  std::vector<double> before{60.0};
  std::vector<double> after{40.0};
  CHECK(r_robustness(before, after, 100.0, 0.0) ==
        doctest::Approx(std::log(3.0)).epsilon(1e-12));

  // zero change hits the clamp: large but finite
  double r = r_robustness({60.0}, {60.0}, 100.0, 0.0);
  CHECK(std::isfinite(r));
  CHECK(r == doctest::Approx(std::log(60.0 / 1e-6)).epsilon(1e-12));
  CHECK_THROWS_AS(r_robustness({1.0}, {1.0}, 0.0, 0.0), Error);
}

TEST_CASE("r_robustness increases when changes shrink") {
  std::vector<double> before{30, 60, 80};
  std::vector<double> after{20, 75, 70};
  std::vector<double> halved(after.size());
  for (size_t i = 0; i < after.size(); ++i) {
    halved[i] = before[i] + (after[i] - before[i]) / 2.0;
  }
  CHECK(r_robustness(before, halved) > r_robustness(before, after));
}

TEST_CASE("ssim identity, symmetry and noise ordering") {
  Tensor x = generate_base(2, BaseKind::kPerlinLike);
  CHECK(ssim(x, x) == doctest::Approx(1.0).epsilon(1e-12));

  Tensor noisy_small = distort(x, DistortKind::kGaussNoise, 0.0667, 5);   // ~0.02 amplitude
  Tensor noisy_large = distort(x, DistortKind::kGaussNoise, 0.6667, 5);   // ~0.2 amplitude
  CHECK(ssim(x, noisy_small) == doctest::Approx(ssim(noisy_small, x)).epsilon(1e-12));
  CHECK(ssim(x, noisy_large) < ssim(x, noisy_small));
  CHECK_THROWS_AS(ssim(x, Tensor({3, 16, 16})), Error);
}

TEST_CASE("average_ranks handles ties with midpoints") {
  auto r = average_ranks({10, 10, 5, 20});
  CHECK(r[0] == 2.5);
  CHECK(r[1] == 2.5);
  CHECK(r[2] == 1.0);
  CHECK(r[3] == 4.0);
}
