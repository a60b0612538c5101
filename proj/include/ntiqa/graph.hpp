#pragma once

#include <cstdint>
#include <vector>

#include "ntiqa/tensor.hpp"

namespace ntiqa {

using NodeId = int32_t;

enum class Op : uint8_t {
  kLeaf,
  kAdd,
  kSub,
  kScalarMul,
  kMul,      // elementwise
  kMatmul,   // [m,k]x[k,n] -> [m,n] or [m,k]x[k] -> [m]
  kConv2d,   // stride 1, symmetric zero padding
  kChannelBiasAdd,  // [C,H,W] + [C]
  kRelu,
  kSigmoid,
  kAvgPool2d,    // window w, stride w
  kLocalMean2d,  // window w, stride 1, valid; per-channel sliding mean
  kFlatten,
  kReduceMean,
  kReduceSum,
  kAbs,
  kSquare,
  kReciprocal,
};

const char* op_name(Op op);

struct Node {
  Op op = Op::kLeaf;
  std::vector<NodeId> inputs;
  Tensor value;        // eager forward result
  double scalar = 0.0; // kScalarMul factor
  int window = 0;      // kAvgPool2d / kLocalMean2d
  int pad = 0;         // kConv2d
};

// Append-only computation graph with eager forward evaluation and
// reverse-mode backward(). Inputs of a node always have smaller ids, so
// the node list is topologically ordered by construction.
class Graph {
 public:
  NodeId leaf(Tensor value);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId scalar_mul(NodeId a, double s);
  NodeId mul(NodeId a, NodeId b);
  NodeId matmul(NodeId a, NodeId b);
  NodeId conv2d(NodeId input, NodeId kernel, int pad);
  NodeId channel_bias_add(NodeId input, NodeId bias);
  NodeId relu(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId avg_pool2d(NodeId a, int window);
  NodeId local_mean2d(NodeId a, int window);
  NodeId flatten(NodeId a);
  NodeId reduce_mean(NodeId a);
  NodeId reduce_sum(NodeId a);
  NodeId abs(NodeId a);
  NodeId square(NodeId a);
  NodeId reciprocal(NodeId a);

  const Tensor& value(NodeId id) const { return nodes_[check_id(id)].value; }
  const Node& node(NodeId id) const { return nodes_[check_id(id)]; }
  int64_t size() const { return static_cast<int64_t>(nodes_.size()); }

  // d(root)/d(node) for every node; zeros where root does not depend on
  // the node. root must be scalar (shape [1]).
  std::vector<Tensor> backward(NodeId root) const;

 private:
  NodeId push(Node node);
  size_t check_id(NodeId id) const;
  const Tensor& in(const Node& n, int i) const {
    return nodes_[static_cast<size_t>(n.inputs[static_cast<size_t>(i)])].value;
  }

  std::vector<Node> nodes_;
};

}  // namespace ntiqa
