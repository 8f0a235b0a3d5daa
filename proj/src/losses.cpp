#include "lau/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace lau {

namespace {

void require_same(const LossMap& a, const LossMap& b, const char* what) {
  if (!a.same_dims(b)) throw ShapeError(std::string(what) + ": loss map dims differ");
}

void check_logits(const Tensor4& logits, const LabelMap& labels) {
  const auto& s = logits.shape();
  if (s.c != labels.num_classes) {
    throw ShapeError("logit channels " + std::to_string(s.c) + " != num_classes " +
                     std::to_string(labels.num_classes));
  }
  if (s.n != labels.n || s.h != labels.h || s.w != labels.w) {
    throw ShapeError("logits " + to_string(s) + " do not match label map dims");
  }
}

}  // namespace

LossMap::LossMap(int n_, int h_, int w_, double fill) : n(n_), h(h_), w(w_) {
  const auto count = static_cast<Eigen::Index>(n) * h * w;
  values = Eigen::ArrayXd::Constant(count, fill);
  valid = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(count, true);
}

CoordinateMap::CoordinateMap(int n_, int h_, int w_) : n(n_), h(h_), w(w_) {
  const auto count = static_cast<Eigen::Index>(n) * h * w;
  px = Eigen::ArrayXd::Zero(count);
  py = Eigen::ArrayXd::Zero(count);
}

void CandidateSet::validate() const {
  for (int i = 0; i < kNumCandidates; ++i) {
    if (!losses[i].same_dims(losses[0]) || losses[i].size() != losses[0].size()) {
      throw ShapeError("candidate set: loss map " + std::to_string(i) + " dims differ");
    }
    if (coords[i].n != losses[0].n || coords[i].h != losses[0].h ||
        coords[i].w != losses[0].w || coords[i].size() != losses[0].size()) {
      throw ShapeError("candidate set: coordinate map " + std::to_string(i) +
                       " dims differ from the loss maps");
    }
  }
}

LossMap cross_entropy_map(const Tensor4& logits, const LabelMap& labels) {
  check_logits(logits, labels);
  const auto& s = logits.shape();
  LossMap out(s.n, s.h, s.w);
  const auto plane = static_cast<Eigen::Index>(s.plane_size());
  for (int n = 0; n < s.n; ++n) {
    auto m = logits.sample(n);
    for (Eigen::Index p = 0; p < plane; ++p) {
      const Eigen::Index i = n * plane + p;
      const int label = labels.labels[static_cast<std::size_t>(i)];
      if (label == labels.ignore_value) {
        out.values[i] = 0.0;
        out.valid[i] = false;
        continue;
      }
      const double top = m.col(p).maxCoeff();
      const double lse = top + std::log((m.col(p).array() - top).exp().sum());
      out.values[i] = lse - m(label, p);
    }
  }
  return out;
}

Tensor4 cross_entropy_backward(const Tensor4& logits, const LabelMap& labels,
                               const Eigen::ArrayXd& pixel_weights) {
  check_logits(logits, labels);
  const auto& s = logits.shape();
  if (static_cast<std::size_t>(pixel_weights.size()) != labels.size()) {
    throw ShapeError("cross_entropy_backward: weight count mismatch");
  }
  Tensor4 grad(s);
  const auto plane = static_cast<Eigen::Index>(s.plane_size());
  for (int n = 0; n < s.n; ++n) {
    auto m = logits.sample(n);
    auto g = grad.sample(n);
    for (Eigen::Index p = 0; p < plane; ++p) {
      const Eigen::Index i = n * plane + p;
      const int label = labels.labels[static_cast<std::size_t>(i)];
      if (label == labels.ignore_value || pixel_weights[i] == 0.0) continue;
      const double top = m.col(p).maxCoeff();
      Eigen::VectorXd prob = (m.col(p).array() - top).exp().matrix();
      prob /= prob.sum();
      prob[label] -= 1.0;
      g.col(p) = pixel_weights[i] * prob;
    }
  }
  return grad;
}

LossMap smooth_l1(const CoordinateMap& pred, const CoordinateMap& target) {
  if (!pred.same_dims(target) || pred.size() != target.size()) {
    throw ShapeError("smooth_l1: coordinate map dims differ");
  }
  auto huber = [](const Eigen::ArrayXd& d) {
    const Eigen::ArrayXd a = d.abs();
    return (a < 1.0).select(0.5 * d.square(), a - 0.5).eval();
  };
  LossMap out(pred.n, pred.h, pred.w);
  out.values = huber(pred.px - target.px) + huber(pred.py - target.py);
  return out;
}

CoordinateGrad smooth_l1_grad(const CoordinateMap& pred, const CoordinateMap& target) {
  if (!pred.same_dims(target) || pred.size() != target.size()) {
    throw ShapeError("smooth_l1_grad: coordinate map dims differ");
  }
  auto dhuber = [](const Eigen::ArrayXd& d) {
    return (d.abs() < 1.0).select(d, d.sign()).eval();
  };
  return {dhuber(pred.px - target.px), dhuber(pred.py - target.py)};
}

Eigen::ArrayXd offset_guided_weights(const LossMap& loss, const LossMap& aux, double lambda) {
  require_same(loss, aux, "offset_guided_loss");
  return (loss.values < aux.values).select(Eigen::ArrayXd::Ones(loss.size()),
                                           Eigen::ArrayXd::Constant(loss.size(), 1.0 + lambda));
}

LossMap offset_guided_loss(const LossMap& loss, const LossMap& aux, double lambda) {
  LossMap out = loss;
  out.values = loss.values * offset_guided_weights(loss, aux, lambda);
  out.values = loss.valid.select(out.values, 0.0);
  return out;
}

Eigen::ArrayXd candidate_weights(const std::array<LossMap, kNumCandidates>& losses,
                                 double lambda) {
  const LossMap& own = losses[0];
  Eigen::Array<bool, Eigen::Dynamic, 1> minimal =
      Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(own.size(), true);
  for (int i = 1; i < kNumCandidates; ++i) {
    require_same(own, losses[i], "candidate_weights");
    minimal = minimal && (own.values <= losses[i].values);
  }
  return minimal.select(Eigen::ArrayXd::Ones(own.size()),
                        Eigen::ArrayXd::Constant(own.size(), 1.0 + lambda));
}

std::array<LossMap, kNumCandidates> candidate_losses(const Tensor4& input,
                                                     const OffsetField& offsets, int k,
                                                     const LogitsFn& logits_fn,
                                                     const LabelMap& labels) {
  std::array<LossMap, kNumCandidates> out;
  out[0] = cross_entropy_map(logits_fn(lau_forward(input, offsets, k)), labels);
  for (int i = 0; i < 4; ++i) {
    out[i + 1] =
        cross_entropy_map(logits_fn(corner_upsample(input, k, kCandidateCorners[i])), labels);
  }
  return out;
}

std::array<CoordinateMap, kNumCandidates> candidate_coords(const Shape4& input_shape,
                                                           const OffsetField& offsets, int k) {
  if (offsets.groups() != 1) {
    throw ShapeError("candidate coordinates need a single offset group");
  }
  if (offsets.n() != input_shape.n || offsets.h() != input_shape.h * k ||
      offsets.w() != input_shape.w * k) {
    throw ShapeError("candidate coordinates: offset field does not match input");
  }
  const int n = offsets.n();
  const int H = offsets.h();
  const int W = offsets.w();
  std::array<CoordinateMap, kNumCandidates> out;
  for (auto& m : out) m = CoordinateMap(n, H, W);
  Eigen::Index i = 0;
  for (int b = 0; b < n; ++b) {
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x, ++i) {
        out[0].px[i] = static_cast<double>(x) / k + offsets.dx(b, 0, y, x);
        out[0].py[i] = static_cast<double>(y) / k + offsets.dy(b, 0, y, x);
        for (int c = 0; c < 4; ++c) {
          const Corner& corner = kCandidateCorners[c];
          out[c + 1].px[i] = corner_source_index(x, k, corner.x, input_shape.w);
          out[c + 1].py[i] = corner_source_index(y, k, corner.y, input_shape.h);
        }
      }
    }
  }
  return out;
}

CandidateSet build_candidate_set(const Tensor4& input, const OffsetField& offsets, int k,
                                 const LogitsFn& logits_fn, const LabelMap& labels) {
  CandidateSet cs{candidate_losses(input, offsets, k, logits_fn, labels),
                  candidate_coords(input.shape(), offsets, k)};
  cs.validate();
  return cs;
}

CandidateSet build_candidate_set(const Tensor4& input, const OffsetField& offsets, int k,
                                 const LabelMap& labels) {
  return build_candidate_set(input, offsets, k, [](const Tensor4& t) { return t; }, labels);
}

Eigen::ArrayXi select_candidate(const CandidateSet& cs) {
  cs.validate();
  const auto count = cs.losses[0].size();
  Eigen::ArrayXi best = Eigen::ArrayXi::Zero(count);
  for (Eigen::Index p = 0; p < count; ++p) {
    if (!cs.losses[0].valid[p]) continue;
    double lowest = cs.losses[0].values[p];
    for (int i = 1; i < kNumCandidates; ++i) {
      if (cs.losses[i].values[p] < lowest) {
        lowest = cs.losses[i].values[p];
        best[p] = i;
      }
    }
  }
  return best;
}

CoordinateMap select_theta_opt(const CandidateSet& cs) {
  const Eigen::ArrayXi best = select_candidate(cs);
  CoordinateMap out(cs.coords[0].n, cs.coords[0].h, cs.coords[0].w);
  for (Eigen::Index p = 0; p < best.size(); ++p) {
    out.px[p] = cs.coords[best[p]].px[p];
    out.py[p] = cs.coords[best[p]].py[p];
  }
  return out;
}

LossMap regression_loss(const CandidateSet& cs, double gamma, double lambda) {
  const CoordinateMap target = select_theta_opt(cs);
  const LossMap offset_term = smooth_l1(target, cs.coords[0]);
  const Eigen::ArrayXd weights = candidate_weights(cs.losses, lambda);
  LossMap out = cs.losses[0];
  out.values = gamma * offset_term.values + cs.losses[0].values * weights;
  out.values = out.valid.select(out.values, 0.0);
  return out;
}

Eigen::Index valid_count(const LossMap& map) { return map.valid.count(); }

double reduce_loss(const LossMap& map) {
  const Eigen::Index count = valid_count(map);
  if (count == 0) throw EmptyReductionError("reduce_loss: no valid pixels");
  return map.valid.select(map.values, 0.0).sum() / static_cast<double>(count);
}

LossMap subsample(const LossMap& map, int stride) {
  if (stride < 1) throw ShapeError("subsample: stride must be >= 1");
  const int h = (map.h + stride - 1) / stride;
  const int w = (map.w + stride - 1) / stride;
  LossMap out(map.n, h, w);
  Eigen::Index i = 0;
  for (int b = 0; b < map.n; ++b) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x, ++i) {
        const Eigen::Index src =
            (static_cast<Eigen::Index>(b) * map.h + y * stride) * map.w + x * stride;
        out.values[i] = map.values[src];
        out.valid[i] = map.valid[src];
      }
    }
  }
  return out;
}

LabelMap subsample(const LabelMap& labels, int stride) {
  if (stride < 1) throw ShapeError("subsample: stride must be >= 1");
  const int h = (labels.h + stride - 1) / stride;
  const int w = (labels.w + stride - 1) / stride;
  LabelMap out(labels.n, h, w, labels.num_classes, 0, labels.ignore_value);
  for (int b = 0; b < labels.n; ++b) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) out(b, y, x) = labels(b, y * stride, x * stride);
    }
  }
  return out;
}

double switch_margin(const LossMap& a, const LossMap& b) {
  require_same(a, b, "switch_margin");
  double margin = std::numeric_limits<double>::infinity();
  for (Eigen::Index p = 0; p < a.size(); ++p) {
    const double gap = std::abs(a.values[p] - b.values[p]);
    if (a.valid[p] && gap > 0.0) margin = std::min(margin, gap);
  }
  return margin;
}

double candidate_margin(const std::array<LossMap, kNumCandidates>& losses) {
  double margin = std::numeric_limits<double>::infinity();
  for (Eigen::Index p = 0; p < losses[0].size(); ++p) {
    if (!losses[0].valid[p]) continue;
    std::array<double, kNumCandidates> v{};
    for (int c = 0; c < kNumCandidates; ++c) v[c] = losses[c].values[p];
    const double others = *std::min_element(v.begin() + 1, v.end());
    if (v[0] != others) margin = std::min(margin, std::abs(v[0] - others));
    std::sort(v.begin(), v.end());
    for (int c = 1; c < kNumCandidates; ++c) {
      if (v[c] != v[0]) {
        margin = std::min(margin, v[c] - v[0]);
        break;
      }
    }
  }
  return margin;
}

}  // namespace lau
