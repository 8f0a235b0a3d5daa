#include "lau/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <utility>

namespace lau {

std::string to_string(const Shape4& shape) {
  std::ostringstream os;
  os << "(" << shape.n << ", " << shape.c << ", " << shape.h << ", " << shape.w
     << ")";
  return os.str();
}

std::size_t nchw_index(int n_i, int c_i, int h_i, int w_i, const Shape4& shape) {
  if (n_i < 0 || n_i >= shape.n || c_i < 0 || c_i >= shape.c || h_i < 0 ||
      h_i >= shape.h || w_i < 0 || w_i >= shape.w) {
    std::ostringstream os;
    os << "index (" << n_i << ", " << c_i << ", " << h_i << ", " << w_i
       << ") out of bounds for shape " << to_string(shape);
    throw IndexError(os.str());
  }
  return ((static_cast<std::size_t>(n_i) * shape.c + c_i) * shape.h + h_i) *
             shape.w +
         w_i;
}

Tensor4::Tensor4(const Shape4& shape, double fill) : shape_(shape) {
  if (!shape.valid()) throw ShapeError("invalid tensor shape " + to_string(shape));
  data_ = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(shape.size()), fill);
}

Tensor4::Tensor4(const Shape4& shape, Eigen::VectorXd data)
    : shape_(shape), data_(std::move(data)) {
  if (!shape.valid()) throw ShapeError("invalid tensor shape " + to_string(shape));
  if (static_cast<std::size_t>(data_.size()) != shape.size()) {
    throw ShapeError("data length " + std::to_string(data_.size()) +
                     " does not match shape " + to_string(shape));
  }
}

PlaneMap Tensor4::plane(int n_i, int c_i) {
  return PlaneMap(data_.data() + offset(n_i, c_i, 0, 0), shape_.h, shape_.w);
}

ConstPlaneMap Tensor4::plane(int n_i, int c_i) const {
  return ConstPlaneMap(data_.data() + offset(n_i, c_i, 0, 0), shape_.h, shape_.w);
}

PlaneMap Tensor4::sample(int n_i) {
  return PlaneMap(data_.data() + offset(n_i, 0, 0, 0), shape_.c,
                  static_cast<Eigen::Index>(shape_.plane_size()));
}

ConstPlaneMap Tensor4::sample(int n_i) const {
  return ConstPlaneMap(data_.data() + offset(n_i, 0, 0, 0), shape_.c,
                       static_cast<Eigen::Index>(shape_.plane_size()));
}

LabelMap::LabelMap(int n_, int h_, int w_, int num_classes_, std::int32_t fill,
                   int ignore_value_)
    : n(n_), h(h_), w(w_), num_classes(num_classes_), ignore_value(ignore_value_) {
  if (n < 1 || h < 1 || w < 1) throw ShapeError("invalid label map dimensions");
  if (num_classes < 2) throw ShapeError("label map needs at least 2 classes");
  labels.assign(static_cast<std::size_t>(n) * h * w, fill);
}

void LabelMap::validate() const {
  if (labels.size() != static_cast<std::size_t>(n) * h * w) {
    throw ShapeError("label storage does not match dimensions");
  }
  for (auto v : labels) {
    if (v != ignore_value && (v < 0 || v >= num_classes)) {
      throw ShapeError("label " + std::to_string(v) + " outside [0, " +
                       std::to_string(num_classes) + ")");
    }
  }
}

LabelMap argmax_labels(const Tensor4& scores) {
  const auto& s = scores.shape();
  LabelMap out(s.n, s.h, s.w, std::max(2, s.c));
  const auto plane = static_cast<Eigen::Index>(s.plane_size());
  for (int n = 0; n < s.n; ++n) {
    auto m = scores.sample(n);
    for (Eigen::Index p = 0; p < plane; ++p) {
      Eigen::Index best = 0;
      m.col(p).maxCoeff(&best);
      out.labels[static_cast<std::size_t>(n) * plane + p] =
          static_cast<std::int32_t>(best);
    }
  }
  return out;
}

Tensor4 concat_batch(const std::vector<const Tensor4*>& parts) {
  if (parts.empty()) throw ShapeError("concat_batch: no tensors");
  Shape4 shape = parts.front()->shape();
  int total = 0;
  for (const auto* t : parts) {
    const auto& s = t->shape();
    if (s.c != shape.c || s.h != shape.h || s.w != shape.w) {
      throw ShapeError("concat_batch: mismatched shapes");
    }
    total += s.n;
  }
  shape.n = total;
  Tensor4 out(shape);
  Eigen::Index pos = 0;
  for (const auto* t : parts) {
    out.data().segment(pos, t->data().size()) = t->data();
    pos += t->data().size();
  }
  return out;
}

LabelMap concat_batch(const std::vector<const LabelMap*>& parts) {
  if (parts.empty()) throw ShapeError("concat_batch: no label maps");
  const auto& first = *parts.front();
  int total = 0;
  for (const auto* l : parts) {
    if (l->h != first.h || l->w != first.w || l->num_classes != first.num_classes) {
      throw ShapeError("concat_batch: mismatched label maps");
    }
    total += l->n;
  }
  LabelMap out(total, first.h, first.w, first.num_classes, 0, first.ignore_value);
  std::size_t pos = 0;
  for (const auto* l : parts) {
    std::copy(l->labels.begin(), l->labels.end(), out.labels.begin() + pos);
    pos += l->labels.size();
  }
  return out;
}

}  // namespace lau
