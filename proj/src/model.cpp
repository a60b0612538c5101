#include "ntiqa/model.hpp"

#include <cmath>
#include <sstream>

#include "ntiqa/rng.hpp"
#include "ntiqa/serialize.hpp"

namespace ntiqa {

std::string arch_kind_name(ArchKind kind) {
  switch (kind) {
    case ArchKind::kMlpScorer: return "MLP-SCORER";
    case ArchKind::kCnnScorer: return "CNN-SCORER";
    case ArchKind::kLinearProbe: return "LINEAR-PROBE";
  }
  return "?";
}

ArchKind parse_arch_kind(const std::string& name) {
  if (name == "MLP-SCORER") return ArchKind::kMlpScorer;
  if (name == "CNN-SCORER") return ArchKind::kCnnScorer;
  if (name == "LINEAR-PROBE") return ArchKind::kLinearProbe;
  throw Error("unknown architecture kind '" + name + "'");
}

ArchSpec ArchSpec::mlp(Shape input_shape, int hidden) {
  ArchSpec s;
  s.kind = ArchKind::kMlpScorer;
  s.input_shape = std::move(input_shape);
  s.hidden = hidden;
  s.validate();
  return s;
}

ArchSpec ArchSpec::cnn(Shape input_shape) {
  ArchSpec s;
  s.kind = ArchKind::kCnnScorer;
  s.input_shape = std::move(input_shape);
  s.validate();
  return s;
}

void ArchSpec::validate() const {
  if (input_shape.size() != 3) {
    throw Error("arch: input shape must be [C,H,W], got " + shape_str(input_shape));
  }
  for (int64_t d : input_shape) {
    if (d <= 0) throw Error("arch: non-positive input dimension in " + shape_str(input_shape));
  }
  if (out_scale <= 0.0 && kind != ArchKind::kLinearProbe) {
    throw Error("arch: output scale must be positive");
  }
  switch (kind) {
    case ArchKind::kMlpScorer:
      if (hidden <= 0) throw Error("arch: MLP hidden size must be positive");
      break;
    case ArchKind::kCnnScorer: {
      if (conv1_channels <= 0 || conv2_channels <= 0 || kernel <= 0 || pool <= 0) {
        throw Error("arch: CNN layer sizes must be positive");
      }
      int64_t h = input_shape[1], w = input_shape[2];
      if (h % (pool * pool) != 0 || w % (pool * pool) != 0) {
        throw Error("arch: input " + shape_str(input_shape) +
                    " not divisible by two pooling stages of " + std::to_string(pool));
      }
      break;
    }
    case ArchKind::kLinearProbe:
      break;
  }
}

ScorerModel::ScorerModel(ArchSpec spec, std::map<std::string, Tensor> params)
    : spec_(std::move(spec)), params_(std::move(params)) {
  spec_.validate();
}

ScorerModel ScorerModel::init(const ArchSpec& spec, uint64_t seed) {
  spec.validate();
  Rng rng(mix_seed(seed, 0x11D));
  auto uniform_tensor = [&](Shape shape, int64_t fan_in) {
    double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-s, s);
    return t;
  };

  std::map<std::string, Tensor> params;
  int64_t c = spec.input_shape[0];
  switch (spec.kind) {
    case ArchKind::kMlpScorer: {
      int64_t d = numel(spec.input_shape);
      int64_t h = spec.hidden;
      params.emplace("fc1.weight", uniform_tensor({h, d}, d));
      params.emplace("fc1.bias", uniform_tensor({h}, d));
      params.emplace("fc2.weight", uniform_tensor({1, h}, h));
      params.emplace("fc2.bias", uniform_tensor({1}, h));
      break;
    }
    case ArchKind::kCnnScorer: {
      int64_t k = spec.kernel;
      int64_t c1 = spec.conv1_channels, c2 = spec.conv2_channels;
      params.emplace("conv1.weight", uniform_tensor({c1, c, k, k}, c * k * k));
      params.emplace("conv1.bias", uniform_tensor({c1}, c * k * k));
      params.emplace("conv2.weight", uniform_tensor({c2, c1, k, k}, c1 * k * k));
      params.emplace("conv2.bias", uniform_tensor({c2}, c1 * k * k));
      int64_t feat = c2 * (spec.input_shape[1] / (spec.pool * spec.pool)) *
                     (spec.input_shape[2] / (spec.pool * spec.pool));
      params.emplace("head.weight", uniform_tensor({1, feat}, feat));
      params.emplace("head.bias", uniform_tensor({1}, feat));
      break;
    }
    case ArchKind::kLinearProbe:
      throw Error("init: linear probes are built from an explicit weight vector");
  }
  return ScorerModel(spec, std::move(params));
}

ScorerModel ScorerModel::linear_probe(Tensor w) {
  Shape in{1, 1, w.size()};
  return linear_probe(std::move(w), std::move(in));
}

ScorerModel ScorerModel::linear_probe(Tensor w, Shape input_shape) {
  if (w.rank() != 1) throw Error("linear_probe: weight must be flat, got " + shape_str(w.shape()));
  if (numel(input_shape) != w.size()) {
    throw Error("linear_probe: weight length " + std::to_string(w.size()) +
                " does not match input shape " + shape_str(input_shape));
  }
  ArchSpec spec;
  spec.kind = ArchKind::kLinearProbe;
  spec.input_shape = std::move(input_shape);
  spec.out_scale = 1.0;
  spec.out_offset = 0.0;
  std::map<std::string, Tensor> params;
  params.emplace("w", std::move(w));
  return ScorerModel(std::move(spec), std::move(params));
}

ScorerModel::Binding ScorerModel::bind(Graph& g) const {
  Binding b;
  for (const auto& [name, t] : params_) b.params.emplace(name, g.leaf(t));
  return b;
}

NodeId ScorerModel::forward(Graph& g, NodeId input, const Binding& b) const {
  const Tensor& x = g.value(input);
  if (x.shape() != spec_.input_shape) {
    throw Error("forward: input shape " + shape_str(x.shape()) +
                " does not match model input " + shape_str(spec_.input_shape));
  }
  auto p = [&](const char* name) {
    auto it = b.params.find(name);
    if (it == b.params.end()) throw Error(std::string("forward: missing parameter ") + name);
    return it->second;
  };
  switch (spec_.kind) {
    case ArchKind::kMlpScorer: {
      NodeId v = g.flatten(input);
      v = g.add(g.matmul(p("fc1.weight"), v), p("fc1.bias"));
      v = g.relu(v);
      v = g.add(g.matmul(p("fc2.weight"), v), p("fc2.bias"));
      v = g.scalar_mul(g.sigmoid(v), spec_.out_scale);
      if (spec_.out_offset != 0.0) {
        v = g.add(v, g.leaf(Tensor::scalar(spec_.out_offset)));
      }
      return v;
    }
    case ArchKind::kCnnScorer: {
      int padding = spec_.kernel / 2;
      NodeId v = g.conv2d(input, p("conv1.weight"), padding);
      v = g.relu(g.channel_bias_add(v, p("conv1.bias")));
      v = g.avg_pool2d(v, spec_.pool);
      v = g.conv2d(v, p("conv2.weight"), padding);
      v = g.relu(g.channel_bias_add(v, p("conv2.bias")));
      v = g.avg_pool2d(v, spec_.pool);
      v = g.add(g.matmul(p("head.weight"), g.flatten(v)), p("head.bias"));
      v = g.scalar_mul(g.sigmoid(v), spec_.out_scale);
      if (spec_.out_offset != 0.0) {
        v = g.add(v, g.leaf(Tensor::scalar(spec_.out_offset)));
      }
      return v;
    }
    case ArchKind::kLinearProbe:
      return g.reduce_sum(g.mul(p("w"), g.flatten(input)));
  }
  throw Error("forward: unknown architecture");
}

void ScorerModel::check_input(const Tensor& image) const {
  if (image.shape() != spec_.input_shape) {
    throw Error("predict: input shape " + shape_str(image.shape()) +
                " does not match model input " + shape_str(spec_.input_shape));
  }
}

double ScorerModel::predict(const Tensor& image) const {
  check_input(image);
  Graph g;
  Binding b = bind(g);
  NodeId out = forward(g, g.leaf(image), b);
  return g.value(out)[0];
}

Tensor grad_input(const ScorerModel& model, const Tensor& x) {
  if (x.shape() != model.input_shape()) {
    throw Error("grad_input: input shape " + shape_str(x.shape()) +
                " does not match model input " + shape_str(model.input_shape()));
  }
  Graph g;
  auto b = model.bind(g);
  NodeId input = g.leaf(x);
  NodeId out = model.forward(g, input, b);
  auto grads = g.backward(out);
  return grads[static_cast<size_t>(input)];
}

Tensor finite_diff_gradient(const ScorerModel& model, const Tensor& x,
                            double step) {
  if (step <= 0.0) throw Error("finite_diff_gradient: step must be positive");
  if (x.shape() != model.input_shape()) {
    throw Error("finite_diff_gradient: input shape " + shape_str(x.shape()) +
                " does not match model input " + shape_str(model.input_shape()));
  }
  Tensor grad(x.shape());
  Tensor probe = x;
  for (int64_t i = 0; i < x.size(); ++i) {
    double orig = probe[i];
    probe[i] = orig + step;
    double fp = model.predict(probe);
    probe[i] = orig - step;
    double fm = model.predict(probe);
    probe[i] = orig;
    grad[i] = (fp - fm) / (2.0 * step);
  }
  return grad;
}

std::vector<uint8_t> relu_pattern(const ScorerModel& model, const Tensor& x) {
  Graph g;
  auto b = model.bind(g);
  model.forward(g, g.leaf(x), b);
  std::vector<uint8_t> pattern;
  for (NodeId id = 0; id < g.size(); ++id) {
    const Node& n = g.node(id);
    if (n.op != Op::kRelu && n.op != Op::kAbs) continue;
    const Tensor& pre = g.value(n.inputs[0]);
    for (int64_t i = 0; i < pre.size(); ++i) {
      pattern.push_back(pre[i] > 0.0 ? 1 : 0);
    }
  }
  return pattern;
}

void save_checkpoint(const std::string& path, const ScorerModel& model) {
  std::ostringstream header;
  header << arch_kind_name(model.spec().kind);
  for (int64_t d : model.input_shape()) header << ' ' << d;
  header << '\n';
  std::string head = header.str();

  NamedTensors tensors(model.params().begin(), model.params().end());
  auto body = encode_tensors(tensors);
  std::vector<uint8_t> bytes(head.begin(), head.end());
  bytes.insert(bytes.end(), body.begin(), body.end());
  write_file(path, bytes.data(), bytes.size());
}

ScorerModel load_checkpoint(const std::string& path) {
  auto bytes = read_file(path);
  size_t nl = 0;
  while (nl < bytes.size() && bytes[nl] != '\n') ++nl;
  if (nl == bytes.size()) throw Error(path + ": missing checkpoint header line");
  std::istringstream header(std::string(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(nl)));
  std::string kind_name;
  Shape input_shape(3);
  if (!(header >> kind_name >> input_shape[0] >> input_shape[1] >> input_shape[2])) {
    throw Error(path + ": malformed checkpoint header");
  }

  auto named = decode_tensors(bytes.data() + nl + 1, bytes.size() - nl - 1, path);
  std::map<std::string, Tensor> params;
  for (auto& [name, t] : named) {
    if (!params.emplace(name, std::move(t)).second) {
      throw Error(path + ": duplicate parameter '" + name + "'");
    }
  }

  ArchSpec spec;
  spec.kind = parse_arch_kind(kind_name);
  spec.input_shape = input_shape;
  switch (spec.kind) {
    case ArchKind::kMlpScorer: {
      auto it = params.find("fc1.weight");
      if (it == params.end()) throw Error(path + ": checkpoint missing fc1.weight");
      spec.hidden = static_cast<int>(it->second.shape()[0]);
      break;
    }
    case ArchKind::kCnnScorer: {
      auto c1 = params.find("conv1.weight");
      auto c2 = params.find("conv2.weight");
      if (c1 == params.end() || c2 == params.end()) {
        throw Error(path + ": checkpoint missing conv weights");
      }
      spec.conv1_channels = static_cast<int>(c1->second.shape()[0]);
      spec.conv2_channels = static_cast<int>(c2->second.shape()[0]);
      spec.kernel = static_cast<int>(c1->second.shape()[2]);
      break;
    }
    case ArchKind::kLinearProbe:
      spec.out_scale = 1.0;
      if (params.find("w") == params.end()) throw Error(path + ": checkpoint missing probe weight");
      break;
  }
  return ScorerModel(std::move(spec), std::move(params));
}

}  // namespace ntiqa
