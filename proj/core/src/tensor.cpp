#include "gesturelab/tensor.hpp"

#include <cmath>
#include <sstream>

namespace gesturelab {

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    check_arg(d >= 0, "negative dimension in shape");
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  check_arg(shape_.size() <= 4, "tensor rank above 4 is not supported");
  data_.assign(static_cast<size_t>(shape_numel(shape_)), 0.0);
}

Tensor Tensor::full(Shape shape, double value) {
  Tensor t(std::move(shape));
  t.fill(value);
  return t;
}

Tensor Tensor::scalar(double value) {
  Tensor t(Shape{1});
  t[0] = value;
  return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> data) {
  Tensor t;
  check_arg(shape_numel(shape) == static_cast<int64_t>(data.size()),
            "Tensor::from: data size does not match shape " + shape_str(shape));
  t.shape_ = std::move(shape);
  t.data_ = std::move(data);
  return t;
}

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev) {
  Tensor t(std::move(shape));
  for (auto& v : t.data_) v = rng.gaussian(0.0, stddev);
  return t;
}

int64_t Tensor::size(int axis) const {
  check_arg(axis >= 0 && axis < rank(), "Tensor::size: axis out of range");
  return shape_[static_cast<size_t>(axis)];
}

Tensor Tensor::reshaped(Shape shape) const {
  check_arg(shape_numel(shape) == numel(),
            "reshape " + shape_str(shape_) + " -> " + shape_str(shape) + " changes element count");
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = data_;
  return t;
}

void Tensor::add_(const Tensor& other) {
  check_arg(numel() == other.numel(), "Tensor::add_: size mismatch");
  flat() += other.flat();
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace gesturelab
