#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "gesturelab/error.hpp"
#include "gesturelab/rng.hpp"

namespace gesturelab {

using Shape = std::vector<int64_t>;

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<MatrixRM>;
using ConstMatMap = Eigen::Map<const MatrixRM>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

// Dense row-major double tensor, rank 0..4. Most operations view it as a
// matrix of shape (numel/last_dim, last_dim); higher-rank shapes are carried
// only for bookkeeping and interface checks.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor from(Shape shape, std::vector<double> data);
  static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0);

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t size(int axis) const;
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  // Matrix view dimensions: (rows, cols) = (numel/last, last).
  int64_t cols() const { return shape_.empty() ? 1 : shape_.back(); }
  int64_t rows() const { return shape_.empty() ? (data_.empty() ? 0 : 1) : numel() / cols(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  double& at(int64_t i, int64_t j) { return data_[static_cast<size_t>(i * cols() + j)]; }
  double at(int64_t i, int64_t j) const { return data_[static_cast<size_t>(i * cols() + j)]; }

  double item() const {
    check_arg(numel() == 1, "Tensor::item requires a single-element tensor");
    return data_[0];
  }

  MatMap mat() { return MatMap(data(), rows(), cols()); }
  ConstMatMap mat() const { return ConstMatMap(data(), rows(), cols()); }
  VecMap flat() { return VecMap(data(), numel()); }
  ConstVecMap flat() const { return ConstVecMap(data(), numel()); }

  // Returns a copy carrying a new shape with identical element count.
  Tensor reshaped(Shape shape) const;

  void fill(double value) { std::fill(data_.begin(), data_.end(), value); }
  void add_(const Tensor& other);
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

}  // namespace gesturelab
