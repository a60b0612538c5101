#include "ntiqa/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "ntiqa/csv.hpp"
#include "ntiqa/metrics.hpp"

namespace ntiqa {

namespace {

bool all_zero(const Tensor& t) {
  for (int64_t i = 0; i < t.size(); ++i) {
    if (t[i] != 0.0) return false;
  }
  return true;
}

// dL/dx of the attack objective at the current iterate.
Tensor loss_grad_input(const ScorerModel& model, const Tensor& x,
                       LossVariant variant, double y) {
  Graph g;
  auto b = model.bind(g);
  NodeId input = g.leaf(x);
  NodeId fx = model.forward(g, input, b);
  NodeId loss = attack_loss_node(g, variant, fx, y);
  auto grads = g.backward(loss);
  return grads[static_cast<size_t>(input)];
}

AttackResult finish(const ScorerModel& model, Tensor x, Tensor x_adv,
                    double score_before, bool degenerate) {
  AttackResult r;
  r.score_before = score_before;
  r.score_after = model.predict(x_adv);
  r.linf = linf_dist(x_adv, x);
  r.ssim = ssim(x, x_adv);
  r.degenerate = degenerate;
  r.x_orig = std::move(x);
  r.x_adv = std::move(x_adv);
  return r;
}

}  // namespace

std::string attack_kind_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::kFgsm: return "fgsm";
    case AttackKind::kIfgsm: return "ifgsm";
    case AttackKind::kUap: return "uap";
    case AttackKind::kPerceptual: return "perceptual";
  }
  return "?";
}

AttackKind parse_attack_kind(const std::string& name) {
  if (name == "fgsm") return AttackKind::kFgsm;
  if (name == "ifgsm") return AttackKind::kIfgsm;
  if (name == "uap") return AttackKind::kUap;
  if (name == "perceptual") return AttackKind::kPerceptual;
  throw Error("unknown attack '" + name + "'");
}

std::string loss_variant_name(LossVariant variant) {
  switch (variant) {
    case LossVariant::kMid: return "MID";
    case LossVariant::kMae: return "MAE";
    case LossVariant::kMse: return "MSE";
  }
  return "?";
}

LossVariant parse_loss_variant(const std::string& name) {
  if (name == "MID") return LossVariant::kMid;
  if (name == "MAE") return LossVariant::kMae;
  if (name == "MSE") return LossVariant::kMse;
  throw Error("unknown loss variant '" + name + "'");
}

double AttackConfig::step_size() const {
  if (alpha > 0.0) return alpha;
  switch (kind) {
    case AttackKind::kFgsm: return eps;
    case AttackKind::kIfgsm: return eps / 5.0;
    case AttackKind::kUap: return uap_scale / 8.0;
    case AttackKind::kPerceptual: return 0.001;
  }
  return eps;
}

void AttackConfig::validate() const {
  if (eps < 0.0) throw Error("attack: eps must be non-negative");
  if (alpha < 0.0) throw Error("attack: alpha must be non-negative");
  if (iters < 0) throw Error("attack: iters must be non-negative");
  if (kind == AttackKind::kUap && uap_scale <= 0.0) {
    throw Error("attack: uap_scale must be positive");
  }
  if (kind == AttackKind::kPerceptual && ssim_weight <= 0.0) {
    throw Error("attack: ssim_weight must be positive");
  }
}

double attack_loss(LossVariant variant, double fx, double y) {
  switch (variant) {
    case LossVariant::kMid: return y <= 50.0 ? fx : -fx;
    case LossVariant::kMae: return std::abs(fx - y);
    case LossVariant::kMse: return (fx - y) * (fx - y);
  }
  throw Error("attack_loss: unknown loss variant");
}

NodeId attack_loss_node(Graph& g, LossVariant variant, NodeId fx, double y) {
  switch (variant) {
    case LossVariant::kMid:
      return y <= 50.0 ? fx : g.scalar_mul(fx, -1.0);
    case LossVariant::kMae:
      return g.abs(g.sub(fx, g.leaf(Tensor::scalar(y))));
    case LossVariant::kMse:
      return g.square(g.sub(fx, g.leaf(Tensor::scalar(y))));
  }
  throw Error("attack_loss: unknown loss variant");
}

Tensor project_linf(const Tensor& x_adv, const Tensor& x_orig, double eps) {
  require_same_shape(x_adv, x_orig, "project_linf");
  Tensor out(x_adv.shape());
  for (int64_t i = 0; i < x_adv.size(); ++i) {
    double v = std::clamp(x_adv[i], x_orig[i] - eps, x_orig[i] + eps);
    out[i] = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

AttackResult fgsm(const ScorerModel& model, const Tensor& x, double y,
                  const AttackConfig& config) {
  config.validate();
  double score_before = model.predict(x);
  Tensor step_dir = sign(loss_grad_input(model, x, config.loss, y));
  if (all_zero(step_dir)) {
    return finish(model, x, x, score_before, /*degenerate=*/true);
  }
  Tensor x_adv = project_linf(add_scaled(x, step_dir, config.eps), x, config.eps);
  return finish(model, x, std::move(x_adv), score_before, false);
}

AttackResult ifgsm(const ScorerModel& model, const Tensor& x, double y,
                   const AttackConfig& config) {
  config.validate();
  double score_before = model.predict(x);
  double alpha = config.step_size();
  Tensor x_adv = x;
  bool moved = false;
  for (int k = 0; k < config.iters; ++k) {
    Tensor step_dir = sign(loss_grad_input(model, x_adv, config.loss, y));
    if (all_zero(step_dir)) break;  // stationary: further steps cannot move
    x_adv = project_linf(add_scaled(x_adv, step_dir, alpha), x, config.eps);
    moved = true;
  }
  return finish(model, x, std::move(x_adv), score_before, !moved);
}

Tensor uap_train(const ScorerModel& surrogate,
                 const std::vector<Tensor>& train_images,
                 const AttackConfig& config) {
  config.validate();
  if (train_images.empty()) throw Error("uap_train: empty training image set");
  for (const Tensor& img : train_images) {
    if (img.shape() != surrogate.input_shape()) {
      throw Error("uap_train: image shape " + shape_str(img.shape()) +
                  " does not match surrogate input " +
                  shape_str(surrogate.input_shape()));
    }
  }
  std::vector<double> clean_scores;
  clean_scores.reserve(train_images.size());
  for (const Tensor& img : train_images) clean_scores.push_back(surrogate.predict(img));

  double alpha = config.step_size();
  double scale = config.uap_scale;
  Tensor u(surrogate.input_shape());
  for (int it = 0; it < config.iters; ++it) {
    Tensor mean_grad(u.shape());
    for (size_t i = 0; i < train_images.size(); ++i) {
      Tensor g = loss_grad_input(surrogate, add_scaled(train_images[i], u, 1.0),
                                 LossVariant::kMid, clean_scores[i]);
      for (int64_t k = 0; k < g.size(); ++k) mean_grad[k] += g[k];
    }
    Tensor step_dir = sign(mean_grad);
    for (int64_t k = 0; k < u.size(); ++k) {
      u[k] = std::clamp(u[k] + alpha * step_dir[k], -scale, scale);
    }
  }
  return u;
}

AttackResult uap_apply(const ScorerModel& model, const Tensor& x,
                       const Tensor& u) {
  require_same_shape(x, u, "uap_apply");
  double score_before = model.predict(x);
  Tensor x_adv = clamp01(add_scaled(x, u, 1.0));
  return finish(model, x, std::move(x_adv), score_before, false);
}

NodeId ssim_node(Graph& g, NodeId x, NodeId y) {
  const Tensor& tx = g.value(x);
  const Tensor& ty = g.value(y);
  require_same_shape(tx, ty, "ssim_node");
  if (tx.rank() != 3) {
    throw Error("ssim_node: expected [C,H,W], got " + shape_str(tx.shape()));
  }
  constexpr double c1 = (kSsimK1 * kSsimL) * (kSsimK1 * kSsimL);
  constexpr double c2 = (kSsimK2 * kSsimL) * (kSsimK2 * kSsimL);

  NodeId mx = g.local_mean2d(x, kSsimWindow);
  NodeId my = g.local_mean2d(y, kSsimWindow);
  NodeId exx = g.local_mean2d(g.square(x), kSsimWindow);
  NodeId eyy = g.local_mean2d(g.square(y), kSsimWindow);
  NodeId exy = g.local_mean2d(g.mul(x, y), kSsimWindow);
  NodeId vx = g.sub(exx, g.square(mx));
  NodeId vy = g.sub(eyy, g.square(my));
  NodeId cxy = g.sub(exy, g.mul(mx, my));

  Shape map_shape = g.value(mx).shape();
  NodeId c1n = g.leaf(Tensor::full(map_shape, c1));
  NodeId c2n = g.leaf(Tensor::full(map_shape, c2));
  NodeId num = g.mul(g.add(g.scalar_mul(g.mul(mx, my), 2.0), c1n),
                     g.add(g.scalar_mul(cxy, 2.0), c2n));
  NodeId den = g.mul(g.add(g.add(g.square(mx), g.square(my)), c1n),
                     g.add(g.add(vx, vy), c2n));
  return g.reduce_mean(g.mul(num, g.reciprocal(den)));
}

AttackResult perceptual_attack(const ScorerModel& model, const Tensor& x,
                               const AttackConfig& config) {
  config.validate();
  double score_before = model.predict(x);
  // Fixed score direction: raise low scores, lower high ones (the
  // midpoint rule used by the MID loss).
  double direction = score_before <= 50.0 ? 1.0 : -1.0;
  double alpha = config.step_size();

  Tensor x_adv = x;
  for (int k = 0; k < config.iters; ++k) {
    Graph g;
    auto b = model.bind(g);
    NodeId ref = g.leaf(x);
    NodeId adv = g.leaf(x_adv);
    NodeId fx = model.forward(g, adv, b);
    NodeId score_term = g.scalar_mul(fx, direction);
    NodeId one = g.leaf(Tensor::scalar(1.0));
    NodeId penalty = g.scalar_mul(g.sub(one, ssim_node(g, ref, adv)),
                                  config.ssim_weight);
    NodeId objective = g.sub(score_term, penalty);
    auto grads = g.backward(objective);
    const Tensor& ga = grads[static_cast<size_t>(adv)];
    x_adv = clamp01(add_scaled(x_adv, ga, alpha));
  }
  return finish(model, x, std::move(x_adv), score_before, false);
}

Tensor worst_case_linf_delta(const ScorerModel& model, const Tensor& x,
                             double eps) {
  if (eps <= 0.0) throw Error("worst_case_linf_delta: eps must be positive");
  Tensor g = grad_input(model, x);
  Tensor delta(g.shape());
  for (int64_t i = 0; i < g.size(); ++i) delta[i] = eps * sign(g[i]);
  return delta;
}

}  // namespace ntiqa
