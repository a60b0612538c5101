#pragma once

#include <vector>

#include "ntiqa/model.hpp"
#include "ntiqa/tensor.hpp"

namespace ntiqa {

// SSIM configuration shared by the metric and the differentiable attack
// path. An 8x8 uniform window suits 32x32 images better than the usual
// 11x11 Gaussian.
constexpr int kSsimWindow = 8;
constexpr double kSsimK1 = 0.01;
constexpr double kSsimK2 = 0.03;
constexpr double kSsimL = 1.0;

// Paired score lists: reference (MOS or pre-attack scores) vs predicted.
struct ScorePairs {
  std::vector<double> reference;
  std::vector<double> predicted;

  size_t n() const { return reference.size(); }
};

double rmse(const ScorePairs& pairs);
double srocc(const ScorePairs& pairs);   // DegenerateInput on constant list
double krocc(const ScorePairs& pairs);   // DegenerateInput on constant list
double plcc(const ScorePairs& pairs);    // DegenerateInput on zero variance

// Log-ratio robustness: mean_i ln(max{b1-f_i, f_i-b2} / max(|f_i-f'_i|, tau)).
// Natural log; tau clamps the zero-change case.
constexpr double kRobustnessTau = 1e-6;
double r_robustness(const std::vector<double>& scores_before,
                    const std::vector<double>& scores_after,
                    double beta1 = 100.0, double beta2 = 0.0,
                    double tau = kRobustnessTau);

// Mean local SSIM over sliding windows, averaged across channels.
double ssim(const Tensor& x, const Tensor& y);

// First-order worst-case diagnostic: lhs = |f(x + eps*sign(grad)) - f(x)|,
// rhs = eps * ||grad||_1.
struct Theorem1Gap {
  double lhs = 0.0;
  double rhs = 0.0;
  double gap = 0.0;
};
Theorem1Gap theorem1_gap(const ScorerModel& model, const Tensor& x, double eps);

// 1-based average ranks (ties get the mean of their positions).
std::vector<double> average_ranks(const std::vector<double>& values);

struct MetricReport {
  double rmse = 0.0;
  double srocc = 0.0;
  double plcc = 0.0;
  double krocc = 0.0;
  double r_robustness = 0.0;
  double mean_l1_norm = 0.0;
  std::vector<double> abs_deltas;  // per-sample |score change|
};

}  // namespace ntiqa
