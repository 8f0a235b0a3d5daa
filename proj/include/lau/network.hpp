#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lau/losses.hpp"
#include "lau/nn.hpp"

namespace lau {

enum class LossKind { kCe, kOff, kReg };
enum class UpsamplerKind { kLau, kBilinear };

std::string to_string(LossKind kind);
std::string to_string(UpsamplerKind kind);
LossKind parse_loss_kind(const std::string& name);
UpsamplerKind parse_upsampler_kind(const std::string& name);

/// How logits are brought to full resolution and scored.
struct PipelineSettings {
  UpsamplerKind upsampler = UpsamplerKind::kLau;
  LossKind loss = LossKind::kOff;
  int lau_ratio = 4;    // first stage, k
  int total_ratio = 8;  // K; bilinear covers the remaining K / k
  double lambda = 0.3;
  double gamma = 0.1;

  int residual_ratio() const { return total_ratio / lau_ratio; }
  /// Throws ConfigError on inconsistent settings.
  void validate() const;
};

/// Decoder plus (for the LaU upsampler) the offset branch.
struct Network {
  ToyDecoder decoder;
  std::optional<OffsetPredictor> offsets;

  /// Layers in declaration order: decoder convs, classifier, then the offset
  /// branch's reduce and expand convolutions when present.
  std::vector<ConvLayer*> layers();
  std::vector<const ConvLayer*> layers() const;
};

struct NetworkShape {
  int in_channels = 4;
  int classes = 4;
  int decoder_width = 16;
  int hidden = 64;  // C' of the offset branch
  int groups = 1;   // M
  int lau_ratio = 4;
  double slope = 0.01;
  double weight_decay = 1e-4;
  bool with_offsets = true;
};

/// Decoder layers use uniform fan-in init with `weight_decay`; the offset
/// branch has zero weight decay and a zero-initialized expand layer.
Network make_network(const NetworkShape& shape, Rng& rng);

struct PipelineResult {
  double loss = 0.0;     // training objective
  double ce_loss = 0.0;  // plain mean cross entropy of the final logits
  Tensor4 logits;        // full resolution
  OffsetField offsets;   // empty when the upsampler is bilinear
  std::vector<LayerGrads> grads;  // aligned with Network::layers(); empty unless requested
  /// Smallest distance from any non-differentiable point the objective
  /// passed through (activation zero crossings, lattice points of the
  /// sampling coordinates, loss-weight and candidate switches).
  double kink_margin = 0.0;
};

PipelineResult run_pipeline(const Network& net, const Tensor4& features,
                            const LabelMap& labels, const PipelineSettings& settings,
                            bool with_grads);

/// Inference: full-resolution logits with auxiliary paths omitted.
Tensor4 predict_logits(const Network& net, const Tensor4& features,
                       const PipelineSettings& settings);

}  // namespace lau

namespace lau {

/// All weights then biases of each layer, in Network::layers() order.
Eigen::VectorXd flatten_parameters(const Network& net);
void assign_parameters(Network& net, const Eigen::VectorXd& flat);
Eigen::VectorXd flatten_gradients(const std::vector<LayerGrads>& grads);

}  // namespace lau
