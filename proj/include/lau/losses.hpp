#pragma once

#include <array>
#include <functional>

#include <Eigen/Core>

#include "lau/samplers.hpp"
#include "lau/tensor.hpp"

namespace lau {

/// Per-pixel loss values with a validity mask, laid out (n, h, w).
/// Invalid pixels hold 0 and are skipped by every reduction.
struct LossMap {
  int n = 1;
  int h = 1;
  int w = 1;
  Eigen::ArrayXd values;
  Eigen::Array<bool, Eigen::Dynamic, 1> valid;

  LossMap() = default;
  LossMap(int n, int h, int w, double fill = 0.0);

  Eigen::Index size() const { return values.size(); }
  bool same_dims(const LossMap& other) const {
    return n == other.n && h == other.h && w == other.w;
  }
};

/// Source-point coordinates (input-grid units) per output pixel.
struct CoordinateMap {
  int n = 1;
  int h = 1;
  int w = 1;
  Eigen::ArrayXd px;
  Eigen::ArrayXd py;

  CoordinateMap() = default;
  CoordinateMap(int n, int h, int w);

  Eigen::Index size() const { return px.size(); }
  bool same_dims(const CoordinateMap& other) const {
    return n == other.n && h == other.h && w == other.w;
  }
};

inline constexpr int kNumCandidates = 5;

/// Loss set and coordinate set aligned index for index:
/// [LaU, (floor, floor), (ceil, floor), (floor, ceil), (ceil, ceil)].
struct CandidateSet {
  std::array<LossMap, kNumCandidates> losses;
  std::array<CoordinateMap, kNumCandidates> coords;

  /// Throws ShapeError unless every member shares the same dims.
  void validate() const;
};

/// -log softmax(logits)[label] per pixel, with max-subtraction.
LossMap cross_entropy_map(const Tensor4& logits, const LabelMap& labels);

/// d(sum_i weight_i * CE_i) / d logits. Ignored pixels contribute nothing.
Tensor4 cross_entropy_backward(const Tensor4& logits, const LabelMap& labels,
                               const Eigen::ArrayXd& pixel_weights);

/// Smooth L1 (beta = 1) summed over the two coordinate components.
LossMap smooth_l1(const CoordinateMap& pred, const CoordinateMap& target);

/// Derivative of smooth_l1 w.r.t. `pred`, per component.
struct CoordinateGrad {
  Eigen::ArrayXd gx;
  Eigen::ArrayXd gy;
};
CoordinateGrad smooth_l1_grad(const CoordinateMap& pred, const CoordinateMap& target);

/// Per-pixel weight 1 where L < L_aux strictly, else 1 + lambda.
Eigen::ArrayXd offset_guided_weights(const LossMap& loss, const LossMap& aux, double lambda);

/// L * weight with the weight from offset_guided_weights. `aux` is a constant:
/// the gradient w.r.t. L is the weight itself.
LossMap offset_guided_loss(const LossMap& loss, const LossMap& aux, double lambda);

/// Per-pixel weight 1 where losses[0] is <= every candidate loss, else
/// 1 + lambda. Used for both the candidate set and its full-resolution
/// counterpart during training.
Eigen::ArrayXd candidate_weights(const std::array<LossMap, kNumCandidates>& losses,
                                 double lambda);

using LogitsFn = std::function<Tensor4(const Tensor4&)>;

/// The five candidate loss maps: LaU sampling followed by the four corner
/// samplers, each passed through `logits_fn` and scored by cross entropy.
std::array<LossMap, kNumCandidates> candidate_losses(const Tensor4& input,
                                                     const OffsetField& offsets, int k,
                                                     const LogitsFn& logits_fn,
                                                     const LabelMap& labels);

/// LaU source points followed by the four clipped corner points.
/// Offsets must use a single group.
std::array<CoordinateMap, kNumCandidates> candidate_coords(const Shape4& input_shape,
                                                           const OffsetField& offsets, int k);

CandidateSet build_candidate_set(const Tensor4& input, const OffsetField& offsets, int k,
                                 const LogitsFn& logits_fn, const LabelMap& labels);
/// Identity logits function: the upsampled input is scored directly.
CandidateSet build_candidate_set(const Tensor4& input, const OffsetField& offsets, int k,
                                 const LabelMap& labels);

/// Index of the minimum-loss candidate per pixel (first index on ties).
Eigen::ArrayXi select_candidate(const CandidateSet& cs);

/// Coordinates of the minimum-loss candidate per pixel.
CoordinateMap select_theta_opt(const CandidateSet& cs);

/// gamma * SmoothL1(theta_opt, LaU point) + L * weight.
/// theta_opt and the auxiliary losses are constants for differentiation.
LossMap regression_loss(const CandidateSet& cs, double gamma, double lambda);

/// Mean over valid pixels. Throws EmptyReductionError if none is valid.
double reduce_loss(const LossMap& map);

/// Smallest nonzero |a - b| over valid pixels. Exact ties come from identical
/// sampling paths and stay tied under perturbation, so they are not kinks.
double switch_margin(const LossMap& a, const LossMap& b);

/// Distance of the candidate weighting and argmin from a switch: per valid
/// pixel, the gap from the smallest loss to the next distinct one and the
/// nonzero gap between the LaU loss and the best corner.
double candidate_margin(const std::array<LossMap, kNumCandidates>& losses);
Eigen::Index valid_count(const LossMap& map);

/// Keeps every `stride`-th row and column of each image.
LossMap subsample(const LossMap& map, int stride);
LabelMap subsample(const LabelMap& labels, int stride);

}  // namespace lau
