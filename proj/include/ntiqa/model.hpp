#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "ntiqa/graph.hpp"
#include "ntiqa/tensor.hpp"

namespace ntiqa {

enum class ArchKind { kMlpScorer, kCnnScorer, kLinearProbe };

std::string arch_kind_name(ArchKind kind);
ArchKind parse_arch_kind(const std::string& name);

// Architecture descriptor. out_scale/out_offset map the final sigmoid onto
// [out_offset, out_scale + out_offset]; both toy scorers use [0, 100].
// The linear probe is an unscaled dot product used as an exact-linearity
// test fixture.
struct ArchSpec {
  ArchKind kind = ArchKind::kCnnScorer;
  Shape input_shape{3, 32, 32};
  int hidden = 32;  // MLP hidden width
  int conv1_channels = 8;
  int conv2_channels = 16;
  int kernel = 3;
  int pool = 2;
  double out_scale = 100.0;   // a
  double out_offset = 0.0;    // b

  static ArchSpec mlp(Shape input_shape = {3, 32, 32}, int hidden = 32);
  static ArchSpec cnn(Shape input_shape = {3, 32, 32});
  void validate() const;
};

// Differentiable quality scorer f: image -> scalar score. Parameters are a
// named tensor map; forward() writes the network into a Graph so the same
// definition serves prediction, input gradients and training.
class ScorerModel {
 public:
  ScorerModel(ArchSpec spec, std::map<std::string, Tensor> params);

  // Deterministic init: uniform in [-s, s] with s = 1/sqrt(fan_in).
  static ScorerModel init(const ArchSpec& spec, uint64_t seed);

  // f(x) = w . flatten(x); input shape defaults to [1,1,len(w)].
  static ScorerModel linear_probe(Tensor w);
  static ScorerModel linear_probe(Tensor w, Shape input_shape);

  const ArchSpec& spec() const { return spec_; }
  const Shape& input_shape() const { return spec_.input_shape; }
  const std::map<std::string, Tensor>& params() const { return params_; }
  std::map<std::string, Tensor>& params() { return params_; }

  struct Binding {
    std::map<std::string, NodeId> params;
  };
  Binding bind(Graph& g) const;  // adds parameter leaves
  NodeId forward(Graph& g, NodeId input, const Binding& binding) const;

  double predict(const Tensor& image) const;

 private:
  void check_input(const Tensor& image) const;

  ArchSpec spec_;
  std::map<std::string, Tensor> params_;
};

// d f(x) / d x, same shape as x.
Tensor grad_input(const ScorerModel& model, const Tensor& x);

// Central-difference gradient estimate, one coordinate at a time.
Tensor finite_diff_gradient(const ScorerModel& model, const Tensor& x,
                            double step);

// Signature of relu activation signs along a forward pass; used by
// gradient checks to detect kink crossings between two nearby inputs.
std::vector<uint8_t> relu_pattern(const ScorerModel& model, const Tensor& x);

void save_checkpoint(const std::string& path, const ScorerModel& model);
ScorerModel load_checkpoint(const std::string& path);

}  // namespace ntiqa
