#pragma once

#include <string>

#include <Eigen/Core>

#include "lau/rng.hpp"
#include "lau/samplers.hpp"
#include "lau/tensor.hpp"

namespace lau {

/// 2-D convolution (cross-correlation), kernel 1 (no padding) or 3 (zero
/// padding 1); spatial size is preserved either way.
///
/// `weights` is (out_ch x in_ch*kernel*kernel), row-major, columns ordered
/// (in_ch, ky, kx), i.e. the usual (out, in, kh, kw) layout flattened.
struct ConvLayer {
  std::string name;
  int in_ch = 1;
  int out_ch = 1;
  int kernel = 1;
  RowMatrixXd weights;
  Eigen::VectorXd bias;
  double weight_decay = 0.0;

  static ConvLayer zeros(std::string name, int in_ch, int out_ch, int kernel,
                         double weight_decay = 0.0);
  /// He-uniform weights in [-sqrt(6 / fan_in), sqrt(6 / fan_in)], zero bias.
  static ConvLayer uniform(std::string name, int in_ch, int out_ch, int kernel,
                           double weight_decay, Rng& rng);

  Eigen::Index parameter_count() const { return weights.size() + bias.size(); }
};

struct LayerGrads {
  RowMatrixXd weights;
  Eigen::VectorXd bias;

  static LayerGrads zeros_like(const ConvLayer& layer);
  LayerGrads& operator+=(const LayerGrads& other);
};

struct ConvGrads {
  Tensor4 input;
  LayerGrads params;
};

Tensor4 conv2d_forward(const ConvLayer& layer, const Tensor4& input);
ConvGrads conv2d_backward(const ConvLayer& layer, const Tensor4& input,
                          const Tensor4& grad_output);

Tensor4 leaky_relu(const Tensor4& input, double alpha);
/// Multiplies by 1 where the forward input was >= 0, else by alpha.
Tensor4 leaky_relu_backward(const Tensor4& input, const Tensor4& grad_output, double alpha);

/// Offset branch: Conv1x1(C -> C') + LeakyReLU + Conv3x3(C' -> 2 M k^2) +
/// PixelShuffle(k). The shuffled 2M channels are interleaved (dx, dy) pairs.
struct OffsetPredictor {
  ConvLayer reduce;
  ConvLayer expand;
  double slope = 0.01;
  int ratio = 1;
  int groups = 1;

  /// `reduce` is uniformly initialized; `expand` starts at exactly zero so the
  /// initial offsets vanish. Both layers carry zero weight decay.
  static OffsetPredictor make(int in_ch, int hidden, int ratio, int groups, double slope,
                              Rng& rng);
};

struct OffsetPredictorTrace {
  Tensor4 reduced;    // before the activation
  Tensor4 activated;
};

OffsetField offset_predictor_forward(const OffsetPredictor& pred, const Tensor4& features);
OffsetField offset_predictor_forward(const OffsetPredictor& pred, const Tensor4& features,
                                     OffsetPredictorTrace& trace);

struct OffsetPredictorGrads {
  Tensor4 features;
  LayerGrads reduce;
  LayerGrads expand;
};

OffsetPredictorGrads offset_predictor_backward(const OffsetPredictor& pred,
                                               const Tensor4& features,
                                               const OffsetPredictorTrace& trace,
                                               const OffsetField& grad_offsets);

/// Stand-in decoder: Conv3x3 + LReLU + Conv3x3 + LReLU gives the shared
/// feature map F, and a Conv1x1 classifier on F gives the low-resolution
/// logits U.
struct ToyDecoder {
  ConvLayer conv1;
  ConvLayer conv2;
  ConvLayer classifier;
  double slope = 0.01;

  static ToyDecoder make(int in_ch, int width, int classes, double slope,
                         double weight_decay, Rng& rng);
};

struct DecoderTrace {
  Tensor4 pre1;
  Tensor4 act1;
  Tensor4 pre2;
};

struct DecoderOutput {
  Tensor4 features;
  Tensor4 logits;
};

DecoderOutput toy_decoder_forward(const ToyDecoder& dec, const Tensor4& input);
DecoderOutput toy_decoder_forward(const ToyDecoder& dec, const Tensor4& input,
                                  DecoderTrace& trace);

struct DecoderGrads {
  LayerGrads conv1;
  LayerGrads conv2;
  LayerGrads classifier;
};

/// Backpropagates gradients arriving at both decoder outputs.
DecoderGrads toy_decoder_backward(const ToyDecoder& dec, const Tensor4& input,
                                  const DecoderTrace& trace, const DecoderOutput& output,
                                  const Tensor4& grad_features, const Tensor4& grad_logits);

}  // namespace lau
