#include "ntiqa/graph.hpp"

#include <cmath>
#include <string>

namespace ntiqa {

namespace {

std::string op_err(Op op, const std::string& msg) {
  return std::string(op_name(op)) + ": " + msg;
}

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kScalarMul: return "scalar_mul";
    case Op::kMul: return "mul";
    case Op::kMatmul: return "matmul";
    case Op::kConv2d: return "conv2d";
    case Op::kChannelBiasAdd: return "channel_bias_add";
    case Op::kRelu: return "relu";
    case Op::kSigmoid: return "sigmoid";
    case Op::kAvgPool2d: return "avg_pool2d";
    case Op::kLocalMean2d: return "local_mean2d";
    case Op::kFlatten: return "flatten";
    case Op::kReduceMean: return "reduce_mean";
    case Op::kReduceSum: return "reduce_sum";
    case Op::kAbs: return "abs";
    case Op::kSquare: return "square";
    case Op::kReciprocal: return "reciprocal";
  }
  return "?";
}

size_t Graph::check_id(NodeId id) const {
  if (id < 0 || static_cast<size_t>(id) >= nodes_.size()) {
    throw Error("graph: invalid node id " + std::to_string(id));
  }
  return static_cast<size_t>(id);
}

NodeId Graph::push(Node node) {
  for (NodeId in_id : node.inputs) check_id(in_id);
  node.value.check_finite(op_name(node.op));
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::leaf(Tensor value) {
  if (value.empty()) throw Error("leaf: empty tensor");
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(value);
  return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!same_shape(ta, tb)) {
    throw Error(op_err(Op::kAdd, "shape mismatch " + shape_str(ta.shape()) +
                                     " vs " + shape_str(tb.shape())));
  }
  Node n;
  n.op = Op::kAdd;
  n.inputs = {a, b};
  n.value = Tensor(ta.shape());
  for (int64_t i = 0; i < ta.size(); ++i) n.value[i] = ta[i] + tb[i];
  return push(std::move(n));
}

NodeId Graph::sub(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!same_shape(ta, tb)) {
    throw Error(op_err(Op::kSub, "shape mismatch " + shape_str(ta.shape()) +
                                     " vs " + shape_str(tb.shape())));
  }
  Node n;
  n.op = Op::kSub;
  n.inputs = {a, b};
  n.value = Tensor(ta.shape());
  for (int64_t i = 0; i < ta.size(); ++i) n.value[i] = ta[i] - tb[i];
  return push(std::move(n));
}

NodeId Graph::scalar_mul(NodeId a, double s) {
  const Tensor& ta = value(a);
  Node n;
  n.op = Op::kScalarMul;
  n.inputs = {a};
  n.scalar = s;
  n.value = Tensor(ta.shape());
  for (int64_t i = 0; i < ta.size(); ++i) n.value[i] = s * ta[i];
  return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!same_shape(ta, tb)) {
    throw Error(op_err(Op::kMul, "shape mismatch " + shape_str(ta.shape()) +
                                     " vs " + shape_str(tb.shape())));
  }
  Node n;
  n.op = Op::kMul;
  n.inputs = {a, b};
  n.value = Tensor(ta.shape());
  for (int64_t i = 0; i < ta.size(); ++i) n.value[i] = ta[i] * tb[i];
  return push(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.rank() != 2 || (tb.rank() != 2 && tb.rank() != 1)) {
    throw Error(op_err(Op::kMatmul, "expected [m,k]x[k,n] or [m,k]x[k], got " +
                                        shape_str(ta.shape()) + " x " +
                                        shape_str(tb.shape())));
  }
  int64_t m = ta.shape()[0];
  int64_t k = ta.shape()[1];
  if (tb.shape()[0] != k) {
    throw Error(op_err(Op::kMatmul, "inner dimension mismatch " +
                                        shape_str(ta.shape()) + " x " +
                                        shape_str(tb.shape())));
  }
  Node n;
  n.op = Op::kMatmul;
  n.inputs = {a, b};
  if (tb.rank() == 1) {
    n.value = Tensor({m});
    for (int64_t i = 0; i < m; ++i) {
      double s = 0.0;
      const double* row = ta.data() + i * k;
      for (int64_t j = 0; j < k; ++j) s += row[j] * tb[j];
      n.value[i] = s;
    }
  } else {
    int64_t p = tb.shape()[1];
    n.value = Tensor({m, p});
    for (int64_t i = 0; i < m; ++i) {
      for (int64_t j = 0; j < p; ++j) {
        double s = 0.0;
        for (int64_t t = 0; t < k; ++t) s += ta[i * k + t] * tb[t * p + j];
        n.value[i * p + j] = s;
      }
    }
  }
  return push(std::move(n));
}

NodeId Graph::conv2d(NodeId input, NodeId kernel, int pad) {
  const Tensor& x = value(input);
  const Tensor& w = value(kernel);
  if (x.rank() != 3 || w.rank() != 4) {
    throw Error(op_err(Op::kConv2d, "expected input [C,H,W] and kernel "
                                    "[O,C,kh,kw], got " +
                                        shape_str(x.shape()) + " and " +
                                        shape_str(w.shape())));
  }
  if (pad < 0) throw Error(op_err(Op::kConv2d, "negative padding"));
  int64_t cin = x.shape()[0], h = x.shape()[1], wdt = x.shape()[2];
  int64_t cout = w.shape()[0], kh = w.shape()[2], kw = w.shape()[3];
  if (w.shape()[1] != cin) {
    throw Error(op_err(Op::kConv2d, "kernel channels " +
                                        std::to_string(w.shape()[1]) +
                                        " != input channels " +
                                        std::to_string(cin) + " (input " +
                                        shape_str(x.shape()) + ", kernel " +
                                        shape_str(w.shape()) + ")"));
  }
  int64_t ho = h + 2 * pad - kh + 1;
  int64_t wo = wdt + 2 * pad - kw + 1;
  if (ho <= 0 || wo <= 0) {
    throw Error(op_err(Op::kConv2d, "kernel " + shape_str(w.shape()) +
                                        " too large for input " +
                                        shape_str(x.shape()) + " with pad " +
                                        std::to_string(pad)));
  }
  Node n;
  n.op = Op::kConv2d;
  n.inputs = {input, kernel};
  n.pad = pad;
  n.value = Tensor({cout, ho, wo});
  for (int64_t co = 0; co < cout; ++co) {
    for (int64_t oi = 0; oi < ho; ++oi) {
      for (int64_t oj = 0; oj < wo; ++oj) {
        double s = 0.0;
        for (int64_t ci = 0; ci < cin; ++ci) {
          for (int64_t u = 0; u < kh; ++u) {
            int64_t ii = oi + u - pad;
            if (ii < 0 || ii >= h) continue;
            const double* xrow = x.data() + (ci * h + ii) * wdt;
            const double* wrow = w.data() + ((co * cin + ci) * kh + u) * kw;
            for (int64_t v = 0; v < kw; ++v) {
              int64_t jj = oj + v - pad;
              if (jj < 0 || jj >= wdt) continue;
              s += xrow[jj] * wrow[v];
            }
          }
        }
        n.value.at3(co, oi, oj) = s;
      }
    }
  }
  return push(std::move(n));
}

NodeId Graph::channel_bias_add(NodeId input, NodeId bias) {
  const Tensor& x = value(input);
  const Tensor& b = value(bias);
  if (x.rank() != 3 || b.rank() != 1 || b.shape()[0] != x.shape()[0]) {
    throw Error(op_err(Op::kChannelBiasAdd,
                       "expected [C,H,W] + [C], got " + shape_str(x.shape()) +
                           " and " + shape_str(b.shape())));
  }
  Node n;
  n.op = Op::kChannelBiasAdd;
  n.inputs = {input, bias};
  n.value = Tensor(x.shape());
  int64_t hw = x.shape()[1] * x.shape()[2];
  for (int64_t c = 0; c < x.shape()[0]; ++c) {
    for (int64_t i = 0; i < hw; ++i) n.value[c * hw + i] = x[c * hw + i] + b[c];
  }
  return push(std::move(n));
}

NodeId Graph::relu(NodeId a) {
  const Tensor& ta = value(a);
  Node n;
  n.op = Op::kRelu;
  n.inputs = {a};
  n.value = Tensor(ta.shape());
  for (int64_t i = 0; i < ta.size(); ++i) n.value[i] = ta[i] > 0.0 ? ta[i] : 0.0;
  return push(std::move(n));
}

NodeId Graph::sigmoid(NodeId a) {
  const Tensor& ta = value(a);
  Node n;
  n.op = Op::kSigmoid;
  n.inputs = {a};
  n.value = Tensor(ta.shape());
  for (int64_t i = 0; i < ta.size(); ++i) n.value[i] = stable_sigmoid(ta[i]);
  return push(std::move(n));
}

NodeId Graph::avg_pool2d(NodeId a, int window) {
  const Tensor& x = value(a);
  if (x.rank() != 3) {
    throw Error(op_err(Op::kAvgPool2d, "expected [C,H,W], got " + shape_str(x.shape())));
  }
  if (window <= 0 || x.shape()[1] % window != 0 || x.shape()[2] % window != 0) {
    throw Error(op_err(Op::kAvgPool2d,
                       "window " + std::to_string(window) +
                           " does not divide input " + shape_str(x.shape())));
  }
  int64_t c = x.shape()[0], ho = x.shape()[1] / window, wo = x.shape()[2] / window;
  double inv = 1.0 / (static_cast<double>(window) * window);
  Node n;
  n.op = Op::kAvgPool2d;
  n.inputs = {a};
  n.window = window;
  n.value = Tensor({c, ho, wo});
  for (int64_t ci = 0; ci < c; ++ci) {
    for (int64_t i = 0; i < ho; ++i) {
      for (int64_t j = 0; j < wo; ++j) {
        double s = 0.0;
        for (int64_t u = 0; u < window; ++u) {
          for (int64_t v = 0; v < window; ++v) {
            s += x.at3(ci, i * window + u, j * window + v);
          }
        }
        n.value.at3(ci, i, j) = s * inv;
      }
    }
  }
  return push(std::move(n));
}

NodeId Graph::local_mean2d(NodeId a, int window) {
  const Tensor& x = value(a);
  if (x.rank() != 3) {
    throw Error(op_err(Op::kLocalMean2d, "expected [C,H,W], got " + shape_str(x.shape())));
  }
  if (window <= 0 || window > x.shape()[1] || window > x.shape()[2]) {
    throw Error(op_err(Op::kLocalMean2d,
                       "window " + std::to_string(window) +
                           " too large for input " + shape_str(x.shape())));
  }
  int64_t c = x.shape()[0];
  int64_t ho = x.shape()[1] - window + 1;
  int64_t wo = x.shape()[2] - window + 1;
  double inv = 1.0 / (static_cast<double>(window) * window);
  Node n;
  n.op = Op::kLocalMean2d;
  n.inputs = {a};
  n.window = window;
  n.value = Tensor({c, ho, wo});
  for (int64_t ci = 0; ci < c; ++ci) {
    for (int64_t i = 0; i < ho; ++i) {
      for (int64_t j = 0; j < wo; ++j) {
        double s = 0.0;
        for (int64_t u = 0; u < window; ++u) {
          for (int64_t v = 0; v < window; ++v) s += x.at3(ci, i + u, j + v);
        }
        n.value.at3(ci, i, j) = s * inv;
      }
    }
  }
  return push(std::move(n));
}

NodeId Graph::flatten(NodeId a) {
  const Tensor& x = value(a);
  Node n;
  n.op = Op::kFlatten;
  n.inputs = {a};
  n.value = Tensor({x.size()}, std::vector<double>(x.data(), x.data() + x.size()));
  return push(std::move(n));
}

NodeId Graph::reduce_mean(NodeId a) {
  const Tensor& x = value(a);
  double s = 0.0;
  for (int64_t i = 0; i < x.size(); ++i) s += x[i];
  Node n;
  n.op = Op::kReduceMean;
  n.inputs = {a};
  n.value = Tensor::scalar(s / static_cast<double>(x.size()));
  return push(std::move(n));
}

NodeId Graph::reduce_sum(NodeId a) {
  const Tensor& x = value(a);
  double s = 0.0;
  for (int64_t i = 0; i < x.size(); ++i) s += x[i];
  Node n;
  n.op = Op::kReduceSum;
  n.inputs = {a};
  n.value = Tensor::scalar(s);
  return push(std::move(n));
}

NodeId Graph::abs(NodeId a) {
  const Tensor& x = value(a);
  Node n;
  n.op = Op::kAbs;
  n.inputs = {a};
  n.value = Tensor(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) n.value[i] = std::abs(x[i]);
  return push(std::move(n));
}

NodeId Graph::square(NodeId a) {
  const Tensor& x = value(a);
  Node n;
  n.op = Op::kSquare;
  n.inputs = {a};
  n.value = Tensor(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) n.value[i] = x[i] * x[i];
  return push(std::move(n));
}

NodeId Graph::reciprocal(NodeId a) {
  const Tensor& x = value(a);
  Node n;
  n.op = Op::kReciprocal;
  n.inputs = {a};
  n.value = Tensor(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) n.value[i] = 1.0 / x[i];
  return push(std::move(n));
}

std::vector<Tensor> Graph::backward(NodeId root) const {
  const Tensor& rv = value(root);
  if (rv.shape() != Shape{1}) {
    throw Error("backward: root must be scalar [1], got " + shape_str(rv.shape()));
  }
  std::vector<Tensor> grads(nodes_.size());
  grads[static_cast<size_t>(root)] = Tensor::scalar(1.0);

  auto slot = [&](NodeId id) -> Tensor& {
    Tensor& g = grads[static_cast<size_t>(id)];
    if (g.empty()) g = Tensor(nodes_[static_cast<size_t>(id)].value.shape());
    return g;
  };

  for (NodeId id = root; id >= 0; --id) {
    const Tensor& g = grads[static_cast<size_t>(id)];
    if (g.empty()) continue;
    const Node& n = nodes_[static_cast<size_t>(id)];
    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kAdd: {
        Tensor& ga = slot(n.inputs[0]);
        Tensor& gb = slot(n.inputs[1]);
        for (int64_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i];
          gb[i] += g[i];
        }
        break;
      }
      case Op::kSub: {
        Tensor& ga = slot(n.inputs[0]);
        Tensor& gb = slot(n.inputs[1]);
        for (int64_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i];
          gb[i] -= g[i];
        }
        break;
      }
      case Op::kScalarMul: {
        Tensor& ga = slot(n.inputs[0]);
        for (int64_t i = 0; i < g.size(); ++i) ga[i] += n.scalar * g[i];
        break;
      }
      case Op::kMul: {
        const Tensor& a = in(n, 0);
        const Tensor& b = in(n, 1);
        Tensor& ga = slot(n.inputs[0]);
        Tensor& gb = slot(n.inputs[1]);
        for (int64_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i] * b[i];
          gb[i] += g[i] * a[i];
        }
        break;
      }
      case Op::kMatmul: {
        const Tensor& a = in(n, 0);
        const Tensor& b = in(n, 1);
        Tensor& ga = slot(n.inputs[0]);
        Tensor& gb = slot(n.inputs[1]);
        int64_t m = a.shape()[0], k = a.shape()[1];
        if (b.rank() == 1) {
          for (int64_t i = 0; i < m; ++i) {
            for (int64_t j = 0; j < k; ++j) {
              ga[i * k + j] += g[i] * b[j];
              gb[j] += a[i * k + j] * g[i];
            }
          }
        } else {
          int64_t p = b.shape()[1];
          for (int64_t i = 0; i < m; ++i) {
            for (int64_t t = 0; t < k; ++t) {
              double s = 0.0;
              for (int64_t j = 0; j < p; ++j) s += g[i * p + j] * b[t * p + j];
              ga[i * k + t] += s;
            }
          }
          for (int64_t t = 0; t < k; ++t) {
            for (int64_t j = 0; j < p; ++j) {
              double s = 0.0;
              for (int64_t i = 0; i < m; ++i) s += a[i * k + t] * g[i * p + j];
              gb[t * p + j] += s;
            }
          }
        }
        break;
      }
      case Op::kConv2d: {
        const Tensor& x = in(n, 0);
        const Tensor& w = in(n, 1);
        Tensor& gx = slot(n.inputs[0]);
        Tensor& gw = slot(n.inputs[1]);
        int64_t cin = x.shape()[0], h = x.shape()[1], wd = x.shape()[2];
        int64_t cout = w.shape()[0], kh = w.shape()[2], kw = w.shape()[3];
        int64_t ho = n.value.shape()[1], wo = n.value.shape()[2];
        int pad = n.pad;
        for (int64_t co = 0; co < cout; ++co) {
          for (int64_t oi = 0; oi < ho; ++oi) {
            for (int64_t oj = 0; oj < wo; ++oj) {
              double go = g.at3(co, oi, oj);
              if (go == 0.0) continue;
              for (int64_t ci = 0; ci < cin; ++ci) {
                for (int64_t u = 0; u < kh; ++u) {
                  int64_t ii = oi + u - pad;
                  if (ii < 0 || ii >= h) continue;
                  double* gxrow = gx.data() + (ci * h + ii) * wd;
                  const double* xrow = x.data() + (ci * h + ii) * wd;
                  double* gwrow = gw.data() + ((co * cin + ci) * kh + u) * kw;
                  const double* wrow = w.data() + ((co * cin + ci) * kh + u) * kw;
                  for (int64_t v = 0; v < kw; ++v) {
                    int64_t jj = oj + v - pad;
                    if (jj < 0 || jj >= wd) continue;
                    gxrow[jj] += go * wrow[v];
                    gwrow[v] += go * xrow[jj];
                  }
                }
              }
            }
          }
        }
        break;
      }
      case Op::kChannelBiasAdd: {
        Tensor& gx = slot(n.inputs[0]);
        Tensor& gb = slot(n.inputs[1]);
        int64_t c = n.value.shape()[0];
        int64_t hw = n.value.shape()[1] * n.value.shape()[2];
        for (int64_t ci = 0; ci < c; ++ci) {
          double s = 0.0;
          for (int64_t i = 0; i < hw; ++i) {
            gx[ci * hw + i] += g[ci * hw + i];
            s += g[ci * hw + i];
          }
          gb[ci] += s;
        }
        break;
      }
      case Op::kRelu: {
        const Tensor& x = in(n, 0);
        Tensor& gx = slot(n.inputs[0]);
        // subgradient at 0 is 0
        for (int64_t i = 0; i < g.size(); ++i) {
          if (x[i] > 0.0) gx[i] += g[i];
        }
        break;
      }
      case Op::kSigmoid: {
        Tensor& gx = slot(n.inputs[0]);
        for (int64_t i = 0; i < g.size(); ++i) {
          double y = n.value[i];
          gx[i] += g[i] * y * (1.0 - y);
        }
        break;
      }
      case Op::kAvgPool2d: {
        Tensor& gx = slot(n.inputs[0]);
        int w = n.window;
        double inv = 1.0 / (static_cast<double>(w) * w);
        int64_t c = n.value.shape()[0], ho = n.value.shape()[1], wo = n.value.shape()[2];
        for (int64_t ci = 0; ci < c; ++ci) {
          for (int64_t i = 0; i < ho; ++i) {
            for (int64_t j = 0; j < wo; ++j) {
              double go = g.at3(ci, i, j) * inv;
              for (int64_t u = 0; u < w; ++u) {
                for (int64_t v = 0; v < w; ++v) {
                  gx.at3(ci, i * w + u, j * w + v) += go;
                }
              }
            }
          }
        }
        break;
      }
      case Op::kLocalMean2d: {
        Tensor& gx = slot(n.inputs[0]);
        int w = n.window;
        double inv = 1.0 / (static_cast<double>(w) * w);
        int64_t c = n.value.shape()[0], ho = n.value.shape()[1], wo = n.value.shape()[2];
        for (int64_t ci = 0; ci < c; ++ci) {
          for (int64_t i = 0; i < ho; ++i) {
            for (int64_t j = 0; j < wo; ++j) {
              double go = g.at3(ci, i, j) * inv;
              if (go == 0.0) continue;
              for (int64_t u = 0; u < w; ++u) {
                for (int64_t v = 0; v < w; ++v) gx.at3(ci, i + u, j + v) += go;
              }
            }
          }
        }
        break;
      }
      case Op::kFlatten: {
        Tensor& gx = slot(n.inputs[0]);
        for (int64_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        break;
      }
      case Op::kReduceMean: {
        const Tensor& x = in(n, 0);
        Tensor& gx = slot(n.inputs[0]);
        double go = g[0] / static_cast<double>(x.size());
        for (int64_t i = 0; i < x.size(); ++i) gx[i] += go;
        break;
      }
      case Op::kReduceSum: {
        const Tensor& x = in(n, 0);
        Tensor& gx = slot(n.inputs[0]);
        for (int64_t i = 0; i < x.size(); ++i) gx[i] += g[0];
        break;
      }
      case Op::kAbs: {
        const Tensor& x = in(n, 0);
        Tensor& gx = slot(n.inputs[0]);
        for (int64_t i = 0; i < g.size(); ++i) gx[i] += g[i] * sign(x[i]);
        break;
      }
      case Op::kSquare: {
        const Tensor& x = in(n, 0);
        Tensor& gx = slot(n.inputs[0]);
        for (int64_t i = 0; i < g.size(); ++i) gx[i] += g[i] * 2.0 * x[i];
        break;
      }
      case Op::kReciprocal: {
        const Tensor& x = in(n, 0);
        Tensor& gx = slot(n.inputs[0]);
        for (int64_t i = 0; i < g.size(); ++i) gx[i] -= g[i] / (x[i] * x[i]);
        break;
      }
    }
  }

  for (size_t i = 0; i < nodes_.size(); ++i) {
    if (grads[i].empty()) grads[i] = Tensor(nodes_[i].value.shape());
  }
  return grads;
}

}  // namespace ntiqa
