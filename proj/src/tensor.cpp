#include "ntiqa/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace ntiqa {

int64_t numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  for (int64_t d : shape_) {
    if (d <= 0) throw Error("tensor: non-positive dimension in " + shape_str(shape_));
  }
  data_.assign(static_cast<size_t>(numel(shape_)), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (int64_t d : shape_) {
    if (d <= 0) throw Error("tensor: non-positive dimension in " + shape_str(shape_));
  }
  if (numel(shape_) != static_cast<int64_t>(data_.size())) {
    throw Error("tensor: shape " + shape_str(shape_) + " does not match " +
                std::to_string(data_.size()) + " elements");
  }
}

Tensor Tensor::full(Shape shape, double value) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::check_finite(const std::string& context) const {
  if (!all_finite()) {
    throw Error(context + ": non-finite value in tensor " + shape_str(shape_));
  }
}

bool same_shape(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape();
}

void require_same_shape(const Tensor& a, const Tensor& b,
                        const std::string& op) {
  if (!same_shape(a, b)) {
    throw Error(op + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                shape_str(b.shape()));
  }
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

Tensor sign(const Tensor& t) {
  Tensor out(t.shape());
  for (int64_t i = 0; i < t.size(); ++i) out[i] = sign(t[i]);
  return out;
}

Tensor clamp01(const Tensor& t) {
  Tensor out(t.shape());
  for (int64_t i = 0; i < t.size(); ++i) out[i] = std::clamp(t[i], 0.0, 1.0);
  return out;
}

Tensor add_scaled(const Tensor& a, const Tensor& b, double s) {
  require_same_shape(a, b, "add_scaled");
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out[i] = a[i] + s * b[i];
  out.check_finite("add_scaled");
  return out;
}

double linf_dist(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "linf_dist");
  double m = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double l1_norm(const Tensor& t) {
  double s = 0.0;
  for (int64_t i = 0; i < t.size(); ++i) s += std::abs(t[i]);
  return s;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (!same_shape(a, b)) return false;
  return std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

}  // namespace ntiqa
