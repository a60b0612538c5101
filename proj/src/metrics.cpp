#include "ntiqa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ntiqa {

namespace {

void require_pairs(const ScorePairs& pairs, const char* op, size_t min_n) {
  if (pairs.reference.size() != pairs.predicted.size()) {
    throw Error(std::string(op) + ": list lengths differ (" +
                std::to_string(pairs.reference.size()) + " vs " +
                std::to_string(pairs.predicted.size()) + ")");
  }
  if (pairs.n() < min_n) {
    throw Error(std::string(op) + ": needs at least " + std::to_string(min_n) +
                " pairs, got " + std::to_string(pairs.n()));
  }
}

bool is_constant(const std::vector<double>& v) {
  for (double x : v) {
    if (x != v.front()) return false;
  }
  return true;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double pearson(const std::vector<double>& a, const std::vector<double>& b,
               const char* op) {
  double ma = mean(a), mb = mean(b);
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double da = a[i] - ma, db = b[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0) {
    throw DegenerateInput(std::string(op) + ": constant list, correlation undefined");
  }
  return cov / std::sqrt(va * vb);
}

}  // namespace

std::vector<double> average_ranks(const std::vector<double>& values) {
  size_t n = values.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t i, size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double rmse(const ScorePairs& pairs) {
  require_pairs(pairs, "rmse", 1);
  double s = 0.0;
  for (size_t i = 0; i < pairs.n(); ++i) {
    double d = pairs.reference[i] - pairs.predicted[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(pairs.n()));
}

double srocc(const ScorePairs& pairs) {
  require_pairs(pairs, "srocc", 2);
  if (is_constant(pairs.reference) || is_constant(pairs.predicted)) {
    throw DegenerateInput("srocc: constant list, rank correlation undefined");
  }
  std::vector<double> ra = average_ranks(pairs.reference);
  std::vector<double> rb = average_ranks(pairs.predicted);
  auto tie_free = [](const std::vector<double>& r) {
    for (double x : r) {
      if (x != std::floor(x)) return false;
    }
    return true;
  };
  size_t n = pairs.n();
  if (tie_free(ra) && tie_free(rb)) {
    double sd2 = 0.0;
    for (size_t i = 0; i < n; ++i) {
      double d = ra[i] - rb[i];
      sd2 += d * d;
    }
    double nn = static_cast<double>(n);
    return 1.0 - 6.0 * sd2 / (nn * (nn * nn - 1.0));
  }
  return pearson(ra, rb, "srocc");
}

double krocc(const ScorePairs& pairs) {
  require_pairs(pairs, "krocc", 2);
  if (is_constant(pairs.reference) || is_constant(pairs.predicted)) {
    throw DegenerateInput("krocc: constant list, rank correlation undefined");
  }
  size_t n = pairs.n();
  int64_t concordant = 0, discordant = 0;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      double a = pairs.reference[i] - pairs.reference[j];
      double b = pairs.predicted[i] - pairs.predicted[j];
      double prod = a * b;
      if (prod > 0.0) ++concordant;
      else if (prod < 0.0) ++discordant;
      // ties count toward neither
    }
  }
  double nn = static_cast<double>(n);
  return 2.0 * static_cast<double>(concordant - discordant) / (nn * (nn - 1.0));
}

double plcc(const ScorePairs& pairs) {
  require_pairs(pairs, "plcc", 2);
  return pearson(pairs.reference, pairs.predicted, "plcc");
}

double r_robustness(const std::vector<double>& scores_before,
                    const std::vector<double>& scores_after, double beta1,
                    double beta2, double tau) {
  if (beta1 <= beta2) {
    throw Error("r_robustness: beta1 must exceed beta2");
  }
  if (scores_before.size() != scores_after.size() || scores_before.empty()) {
    throw Error("r_robustness: score lists must be non-empty and equal length");
  }
  double s = 0.0;
  for (size_t i = 0; i < scores_before.size(); ++i) {
    double f = scores_before[i];
    double allowable = std::max(beta1 - f, f - beta2);
    double change = std::max(std::abs(f - scores_after[i]), tau);
    s += std::log(allowable / change);
  }
  return s / static_cast<double>(scores_before.size());
}

double ssim(const Tensor& x, const Tensor& y) {
  require_same_shape(x, y, "ssim");
  if (x.rank() != 3) throw Error("ssim: expected [C,H,W], got " + shape_str(x.shape()));
  int64_t c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  if (h < kSsimWindow || w < kSsimWindow) {
    throw Error("ssim: image " + shape_str(x.shape()) + " smaller than window " +
                std::to_string(kSsimWindow));
  }
  constexpr double c1 = (kSsimK1 * kSsimL) * (kSsimK1 * kSsimL);
  constexpr double c2 = (kSsimK2 * kSsimL) * (kSsimK2 * kSsimL);
  const double inv = 1.0 / (static_cast<double>(kSsimWindow) * kSsimWindow);

  double total = 0.0;
  int64_t windows = 0;
  for (int64_t ci = 0; ci < c; ++ci) {
    for (int64_t i0 = 0; i0 + kSsimWindow <= h; ++i0) {
      for (int64_t j0 = 0; j0 + kSsimWindow <= w; ++j0) {
        double sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
        for (int64_t u = 0; u < kSsimWindow; ++u) {
          for (int64_t v = 0; v < kSsimWindow; ++v) {
            double a = x.at3(ci, i0 + u, j0 + v);
            double b = y.at3(ci, i0 + u, j0 + v);
            sx += a;
            sy += b;
            sxx += a * a;
            syy += b * b;
            sxy += a * b;
          }
        }
        double mx = sx * inv, my = sy * inv;
        double vx = sxx * inv - mx * mx;
        double vy = syy * inv - my * my;
        double cxy = sxy * inv - mx * my;
        total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) /
                 ((mx * mx + my * my + c1) * (vx + vy + c2));
        ++windows;
      }
    }
  }
  return total / static_cast<double>(windows);
}

Theorem1Gap theorem1_gap(const ScorerModel& model, const Tensor& x, double eps) {
  if (eps <= 0.0) throw Error("theorem1_gap: eps must be positive");
  Tensor g = grad_input(model, x);
  Theorem1Gap out;
  out.rhs = eps * l1_norm(g);
  Tensor shifted = add_scaled(x, sign(g), eps);
  out.lhs = std::abs(model.predict(shifted) - model.predict(x));
  out.gap = std::abs(out.lhs - out.rhs);
  return out;
}

}  // namespace ntiqa
