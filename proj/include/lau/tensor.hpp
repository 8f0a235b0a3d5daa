#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lau/error.hpp"

namespace lau {

using RowMatrixXd =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using PlaneMap = Eigen::Map<RowMatrixXd>;
using ConstPlaneMap = Eigen::Map<const RowMatrixXd>;

/// Dimensions of a batch/channel/row/column array.
struct Shape4 {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t size() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t plane_size() const { return static_cast<std::size_t>(h) * w; }
  bool valid() const { return n >= 1 && c >= 1 && h >= 1 && w >= 1; }

  friend bool operator==(const Shape4&, const Shape4&) = default;
};

std::string to_string(const Shape4& shape);

/// Flat row-major offset of (n_i, c_i, h_i, w_i). Throws IndexError when any
/// index falls outside its dimension.
std::size_t nchw_index(int n_i, int c_i, int h_i, int w_i, const Shape4& shape);

/// Dense rank-4 array of doubles in (n, c, h, w) row-major order.
///
/// Storage is a single Eigen vector, so whole-tensor arithmetic can be written
/// as Eigen expressions on `data()`, and per-plane work through `plane()`.
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(const Shape4& shape, double fill = 0.0);
  Tensor4(const Shape4& shape, Eigen::VectorXd data);
  Tensor4(int n, int c, int h, int w, double fill = 0.0)
      : Tensor4(Shape4{n, c, h, w}, fill) {}

  const Shape4& shape() const { return shape_; }
  int n() const { return shape_.n; }
  int c() const { return shape_.c; }
  int h() const { return shape_.h; }
  int w() const { return shape_.w; }
  std::size_t size() const { return static_cast<std::size_t>(data_.size()); }

  double& operator()(int n_i, int c_i, int h_i, int w_i) {
    return data_[offset(n_i, c_i, h_i, w_i)];
  }
  double operator()(int n_i, int c_i, int h_i, int w_i) const {
    return data_[offset(n_i, c_i, h_i, w_i)];
  }
  // Bounds-checked access.
  double& at(int n_i, int c_i, int h_i, int w_i) {
    return data_[static_cast<Eigen::Index>(nchw_index(n_i, c_i, h_i, w_i, shape_))];
  }
  double at(int n_i, int c_i, int h_i, int w_i) const {
    return data_[static_cast<Eigen::Index>(nchw_index(n_i, c_i, h_i, w_i, shape_))];
  }

  Eigen::VectorXd& data() { return data_; }
  const Eigen::VectorXd& data() const { return data_; }
  double* raw() { return data_.data(); }
  const double* raw() const { return data_.data(); }

  /// One (h x w) channel plane.
  PlaneMap plane(int n_i, int c_i);
  ConstPlaneMap plane(int n_i, int c_i) const;
  /// Sample `n_i` viewed as a (c x h*w) matrix.
  PlaneMap sample(int n_i);
  ConstPlaneMap sample(int n_i) const;

  bool all_finite() const { return data_.allFinite(); }

 private:
  Eigen::Index offset(int n_i, int c_i, int h_i, int w_i) const {
    return ((static_cast<Eigen::Index>(n_i) * shape_.c + c_i) * shape_.h + h_i) *
               shape_.w +
           w_i;
  }

  Shape4 shape_{};
  Eigen::VectorXd data_;
};

/// Integer class map with an ignore value, laid out (n, h, w).
struct LabelMap {
  int n = 1;
  int h = 1;
  int w = 1;
  int num_classes = 2;
  int ignore_value = -1;
  std::vector<std::int32_t> labels;

  LabelMap() = default;
  LabelMap(int n, int h, int w, int num_classes, std::int32_t fill = 0,
           int ignore_value = -1);

  std::int32_t& operator()(int n_i, int y, int x) {
    return labels[index(n_i, y, x)];
  }
  std::int32_t operator()(int n_i, int y, int x) const {
    return labels[index(n_i, y, x)];
  }
  std::size_t index(int n_i, int y, int x) const {
    return (static_cast<std::size_t>(n_i) * h + y) * w + x;
  }
  std::size_t size() const { return labels.size(); }
  bool is_ignored(std::size_t i) const { return labels[i] == ignore_value; }

  /// Throws ShapeError if any label is neither ignore_value nor in
  /// [0, num_classes), or if the storage length does not match n*h*w.
  void validate() const;
};

/// Per-pixel argmax over channels (lowest channel wins ties).
LabelMap argmax_labels(const Tensor4& scores);

/// Stacks single-sample tensors along the batch dimension.
Tensor4 concat_batch(const std::vector<const Tensor4*>& parts);
LabelMap concat_batch(const std::vector<const LabelMap*>& parts);

}  // namespace lau
