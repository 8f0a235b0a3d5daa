#pragma once

#include <span>
#include <vector>

#include "lau/nn.hpp"

namespace lau {

/// base * (1 - iter / total)^power.
double poly_lr(double base, long iter, long total, double power);

/// Momentum buffer for one layer.
struct Velocity {
  RowMatrixXd weights;
  Eigen::VectorXd bias;

  static Velocity zeros_like(const ConvLayer& layer);
};

/// v <- momentum * v + (g + wd * w); w <- w - lr * v, with wd taken from each
/// layer. Bias terms are decayed like weights.
void sgd_step(std::span<ConvLayer* const> layers, std::span<const LayerGrads> grads,
              std::vector<Velocity>& velocity, double lr, double momentum);

}  // namespace lau
