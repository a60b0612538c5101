#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ntiqa/graph.hpp"
#include "ntiqa/model.hpp"
#include "ntiqa/tensor.hpp"

namespace ntiqa {

enum class AttackKind { kFgsm, kIfgsm, kUap, kPerceptual };
enum class LossVariant { kMid, kMae, kMse };

std::string attack_kind_name(AttackKind kind);
AttackKind parse_attack_kind(const std::string& name);
std::string loss_variant_name(LossVariant variant);
LossVariant parse_loss_variant(const std::string& name);

struct AttackConfig {
  AttackKind kind = AttackKind::kFgsm;
  double eps = 0.005;       // l-inf budget, image units
  double alpha = 0.0;       // step size; 0 derives a default per attack
  int iters = 1;            // K
  LossVariant loss = LossVariant::kMid;
  double ssim_weight = 1e6; // perceptual attack Lagrange weight
  double uap_scale = 0.04;  // l-inf bound of the universal perturbation
  uint64_t seed = 0;

  double step_size() const;  // alpha, or the derived default
  void validate() const;
};

struct AttackResult {
  Tensor x_orig;
  Tensor x_adv;
  double score_before = 0.0;
  double score_after = 0.0;
  double linf = 0.0;
  double ssim = 1.0;
  bool degenerate = false;  // zero gradient everywhere; image returned unchanged
};

// Attack objective, differentiable through fx:
//   MID: fx if y <= 50 else -fx;  MAE: |fx - y|;  MSE: (fx - y)^2.
double attack_loss(LossVariant variant, double fx, double y);
NodeId attack_loss_node(Graph& g, LossVariant variant, NodeId fx, double y);

// Clamp each coordinate to [x_orig - eps, x_orig + eps], then to [0,1].
Tensor project_linf(const Tensor& x_adv, const Tensor& x_orig, double eps);

AttackResult fgsm(const ScorerModel& model, const Tensor& x, double y,
                  const AttackConfig& config);
AttackResult ifgsm(const ScorerModel& model, const Tensor& x, double y,
                   const AttackConfig& config);

// One shared perturbation maximizing the mean MID loss over the training
// images via sign-gradient ascent; ||u||_inf <= uap_scale.
Tensor uap_train(const ScorerModel& surrogate,
                 const std::vector<Tensor>& train_images,
                 const AttackConfig& config);
AttackResult uap_apply(const ScorerModel& model, const Tensor& x,
                       const Tensor& u);

// Gradient ascent on |f(x+d) - f(x)| - ssim_weight * (1 - SSIM(x, x+d))
// through a differentiable SSIM. The ascent direction for the score term
// is fixed up-front to push low scores up and high scores down, which
// resolves the |.| kink at d = 0.
AttackResult perceptual_attack(const ScorerModel& model, const Tensor& x,
                               const AttackConfig& config);

// eps * sign(grad_x f(x)): the first-order worst-case l-inf perturbation.
Tensor worst_case_linf_delta(const ScorerModel& model, const Tensor& x,
                             double eps);

// Differentiable SSIM between two graph nodes (shared window constants
// with metrics::ssim).
NodeId ssim_node(Graph& g, NodeId x, NodeId y);

}  // namespace ntiqa
