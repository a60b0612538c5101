#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ntiqa/error.hpp"

namespace ntiqa {

using Shape = std::vector<int64_t>;

int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major tensor of doubles. Used for images, parameters and
// gradients alike. Public operations keep every element finite; anything
// that could produce NaN/Inf calls check_finite() and reports an error.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);  // zero-filled
  Tensor(Shape shape, std::vector<double> data);

  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);  // shape [1]

  const Shape& shape() const { return shape_; }
  int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // (channel, row, col) accessors for rank-3 tensors.
  double& at3(int64_t c, int64_t i, int64_t j) {
    return data_[static_cast<size_t>((c * shape_[1] + i) * shape_[2] + j)];
  }
  double at3(int64_t c, int64_t i, int64_t j) const {
    return data_[static_cast<size_t>((c * shape_[1] + i) * shape_[2] + j)];
  }

  bool all_finite() const;
  void check_finite(const std::string& context) const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

bool same_shape(const Tensor& a, const Tensor& b);
void require_same_shape(const Tensor& a, const Tensor& b,
                        const std::string& op);

// sign(0) = 0 throughout the library.
double sign(double v);
Tensor sign(const Tensor& t);
Tensor clamp01(const Tensor& t);
Tensor add_scaled(const Tensor& a, const Tensor& b, double s);  // a + s*b
double linf_dist(const Tensor& a, const Tensor& b);
double l1_norm(const Tensor& t);
bool bitwise_equal(const Tensor& a, const Tensor& b);

}  // namespace ntiqa
