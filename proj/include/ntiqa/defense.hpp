#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "ntiqa/dataset.hpp"
#include "ntiqa/graph.hpp"
#include "ntiqa/model.hpp"

namespace ntiqa {

struct TrainConfig {
  double lambda = 0.0;   // regularization weight; 0 recovers plain training
  double h = 0.01;       // finite-difference step
  double lr = 0.5;
  int epochs = 40;
  int batch_size = 10;
  uint64_t seed = 1;
  int probe_count = 16;  // test images used for the per-epoch norm probe

  void validate() const;
};

struct EpochStats {
  double iqa_loss = 0.0;      // mean training IQA loss
  double reg_mean = 0.0;      // mean finite-difference norm estimate
  double test_rmse = 0.0;     // prediction RMSE vs MOS on the test split
  double probe_l1norm = 0.0;  // mean exact ||grad_x f||_1 on probe images
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
};

// Exact ||grad_x f(x)||_1.
double l1_grad_norm(const ScorerModel& model, const Tensor& x);

// Finite-difference estimate |f(x + h*sign(grad)) - f(x)| / h with the
// direction treated as a constant. Exactly two forward passes and one
// input-gradient pass.
double norm_reg_estimate(const ScorerModel& model, const Tensor& x, double h);

// Training objective graph with parameters bound as leaves, exposed so the
// gradient structure can be inspected: the shifted input enters the graph
// as a plain constant leaf, so the regularizer needs no second-order
// backpropagation.
struct NtLossGraph {
  Graph graph;
  ScorerModel::Binding binding;
  NodeId input = -1;
  NodeId shifted_input = -1;  // -1 when lambda == 0
  NodeId loss = -1;
  double iqa_value = 0.0;
  double reg_estimate = 0.0;
  int forward_passes = 0;
  int grad_passes = 0;
};
NtLossGraph build_nt_loss(const ScorerModel& model, const Tensor& x,
                          double y_mos, double lambda, double h);

// L_IQA + lambda * estimate^2 with L_IQA = ((f(x) - y)/100)^2.
double nt_loss(const ScorerModel& model, const Tensor& x, double y_mos,
               double lambda, double h);

// Plain SGD over the TRAIN split with seeded shuffling. lambda = 0 is the
// baseline; the same code path with lambda > 0 adds the norm regularizer.
std::pair<ScorerModel, TrainHistory> train(const ScorerModel& model,
                                           const Dataset& dataset,
                                           const TrainConfig& config);

}  // namespace ntiqa
