#include "ntiqa/defense.hpp"

#include <cmath>
#include <numeric>

#include "ntiqa/metrics.hpp"
#include "ntiqa/rng.hpp"

namespace ntiqa {

void TrainConfig::validate() const {
  if (lambda < 0.0) throw Error("train: lambda must be non-negative");
  if (h <= 0.0) throw Error("train: finite-difference step h must be positive");
  if (lr <= 0.0) throw Error("train: learning rate must be positive");
  if (epochs <= 0) throw Error("train: epochs must be positive");
  if (batch_size <= 0) throw Error("train: batch size must be positive");
}

double l1_grad_norm(const ScorerModel& model, const Tensor& x) {
  return l1_norm(grad_input(model, x));
}

double norm_reg_estimate(const ScorerModel& model, const Tensor& x, double h) {
  if (h <= 0.0) throw Error("norm_reg_estimate: h must be positive");
  Graph g;
  auto b = model.bind(g);
  NodeId input = g.leaf(x);
  NodeId fx = model.forward(g, input, b);  // forward pass 1
  auto grads = g.backward(fx);             // input-gradient pass
  Tensor direction = sign(grads[static_cast<size_t>(input)]);
  double f0 = g.value(fx)[0];
  double f1 = model.predict(add_scaled(x, direction, h));  // forward pass 2
  return std::abs(f1 - f0) / h;
}

NtLossGraph build_nt_loss(const ScorerModel& model, const Tensor& x,
                          double y_mos, double lambda, double h) {
  if (lambda < 0.0) throw Error("nt_loss: lambda must be non-negative");
  if (h <= 0.0) throw Error("nt_loss: h must be positive");
  NtLossGraph r;
  Graph& g = r.graph;
  r.binding = model.bind(g);
  r.input = g.leaf(x);
  NodeId fx = model.forward(g, r.input, r.binding);
  r.forward_passes = 1;

  NodeId diff = g.sub(fx, g.leaf(Tensor::scalar(y_mos)));
  NodeId iqa = g.square(g.scalar_mul(diff, 0.01));
  r.iqa_value = g.value(iqa)[0];
  if (lambda == 0.0) {
    r.loss = iqa;
    return r;
  }

  auto grads = g.backward(fx);
  r.grad_passes = 1;
  Tensor direction = sign(grads[static_cast<size_t>(r.input)]);
  // The shifted input is a constant leaf: the direction carries no
  // gradient, so the regularizer differentiates with a single backward
  // pass over the two forward branches.
  r.shifted_input = g.leaf(add_scaled(x, direction, h));
  NodeId fshift = model.forward(g, r.shifted_input, r.binding);
  r.forward_passes = 2;
  NodeId estimate = g.scalar_mul(g.abs(g.sub(fshift, fx)), 1.0 / h);
  r.reg_estimate = g.value(estimate)[0];
  r.loss = g.add(iqa, g.scalar_mul(g.square(estimate), lambda));
  return r;
}

double nt_loss(const ScorerModel& model, const Tensor& x, double y_mos,
               double lambda, double h) {
  NtLossGraph r = build_nt_loss(model, x, y_mos, lambda, h);
  return r.graph.value(r.loss)[0];
}

std::pair<ScorerModel, TrainHistory> train(const ScorerModel& model,
                                           const Dataset& dataset,
                                           const TrainConfig& config) {
  config.validate();
  std::vector<size_t> train_idx = dataset.indices(Split::kTrain);
  std::vector<size_t> test_idx = dataset.indices(Split::kTest);
  if (train_idx.empty()) throw Error("train: dataset has no TRAIN split");

  ScorerModel m = model;
  TrainHistory history;
  Rng shuffle_rng(mix_seed(config.seed, 0x7EA1));

  int64_t probe_count =
      std::min<int64_t>(config.probe_count, static_cast<int64_t>(test_idx.size()));

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(train_idx);
    double sum_iqa = 0.0;
    double sum_reg = 0.0;

    for (size_t start = 0; start < train_idx.size(); start += static_cast<size_t>(config.batch_size)) {
      size_t end = std::min(train_idx.size(), start + static_cast<size_t>(config.batch_size));
      size_t batch = end - start;
      std::map<std::string, Tensor> grad_acc;
      for (const auto& [name, t] : m.params()) grad_acc.emplace(name, Tensor(t.shape()));

      for (size_t k = start; k < end; ++k) {
        const Sample& s = dataset.samples[train_idx[k]];
        NtLossGraph nt;
        try {
          nt = build_nt_loss(m, s.image, s.mos, config.lambda, config.h);
        } catch (const Error& e) {
          throw Error("train: non-finite loss at epoch " + std::to_string(epoch) +
                      " batch " + std::to_string(start / config.batch_size) +
                      " (sample " + std::to_string(s.id) + "): " + e.what());
        }
        double loss = nt.graph.value(nt.loss)[0];
        if (!std::isfinite(loss)) {
          throw Error("train: non-finite loss at epoch " + std::to_string(epoch) +
                      " batch " + std::to_string(start / config.batch_size));
        }
        sum_iqa += nt.iqa_value;
        sum_reg += nt.reg_estimate;

        auto grads = nt.graph.backward(nt.loss);
        for (auto& [name, acc] : grad_acc) {
          const Tensor& g = grads[static_cast<size_t>(nt.binding.params.at(name))];
          for (int64_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
        }
      }

      double scale = config.lr / static_cast<double>(batch);
      for (auto& [name, t] : m.params()) {
        const Tensor& acc = grad_acc.at(name);
        for (int64_t i = 0; i < t.size(); ++i) t[i] -= scale * acc[i];
        t.check_finite("train: parameter update");
      }
    }

    EpochStats stats;
    stats.iqa_loss = sum_iqa / static_cast<double>(train_idx.size());
    stats.reg_mean = sum_reg / static_cast<double>(train_idx.size());
    if (!test_idx.empty()) {
      double se = 0.0;
      for (size_t idx : test_idx) {
        const Sample& s = dataset.samples[idx];
        double d = m.predict(s.image) - s.mos;
        se += d * d;
      }
      stats.test_rmse = std::sqrt(se / static_cast<double>(test_idx.size()));
      double norms = 0.0;
      for (int64_t k = 0; k < probe_count; ++k) {
        norms += l1_grad_norm(m, dataset.samples[test_idx[static_cast<size_t>(k)]].image);
      }
      if (probe_count > 0) stats.probe_l1norm = norms / static_cast<double>(probe_count);
    }
    history.epochs.push_back(stats);
  }
  return {std::move(m), std::move(history)};
}

}  // namespace ntiqa
