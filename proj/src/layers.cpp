#include <algorithm>
#include <cmath>
#include <utility>

#include "lau/nn.hpp"
#include "lau/optim.hpp"

namespace lau {

namespace {

void check_kernel(int kernel) {
  if (kernel != 1 && kernel != 3) {
    throw ShapeError("convolution kernel must be 1 or 3, got " + std::to_string(kernel));
  }
}

// Column matrix of one sample for a 3x3 zero-padded convolution:
// row (ci, ky, kx), column (y, x).
RowMatrixXd im2col3(ConstPlaneMap x, int channels, int h, int w) {
  RowMatrixXd cols = RowMatrixXd::Zero(channels * 9, static_cast<Eigen::Index>(h) * w);
  for (int ci = 0; ci < channels; ++ci) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const Eigen::Index row = ci * 9 + ky * 3 + kx;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          for (int xo = 0; xo < w; ++xo) {
            const int sx = xo + kx - 1;
            if (sx < 0 || sx >= w) continue;
            cols(row, y * w + xo) = x(ci, sy * w + sx);
          }
        }
      }
    }
  }
  return cols;
}

void col2im3(const RowMatrixXd& cols, PlaneMap dx, int channels, int h, int w) {
  for (int ci = 0; ci < channels; ++ci) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const Eigen::Index row = ci * 9 + ky * 3 + kx;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          for (int xo = 0; xo < w; ++xo) {
            const int sx = xo + kx - 1;
            if (sx < 0 || sx >= w) continue;
            dx(ci, sy * w + sx) += cols(row, y * w + xo);
          }
        }
      }
    }
  }
}

}  // namespace

ConvLayer ConvLayer::zeros(std::string name, int in_ch, int out_ch, int kernel,
                           double weight_decay) {
  check_kernel(kernel);
  if (in_ch < 1 || out_ch < 1) throw ShapeError("convolution channels must be >= 1");
  ConvLayer layer;
  layer.name = std::move(name);
  layer.in_ch = in_ch;
  layer.out_ch = out_ch;
  layer.kernel = kernel;
  layer.weights = RowMatrixXd::Zero(out_ch, in_ch * kernel * kernel);
  layer.bias = Eigen::VectorXd::Zero(out_ch);
  layer.weight_decay = weight_decay;
  return layer;
}

ConvLayer ConvLayer::uniform(std::string name, int in_ch, int out_ch, int kernel,
                             double weight_decay, Rng& rng) {
  ConvLayer layer = zeros(std::move(name), in_ch, out_ch, kernel, weight_decay);
  const double bound = std::sqrt(6.0) / std::sqrt(static_cast<double>(in_ch * kernel * kernel));
  for (Eigen::Index i = 0; i < layer.weights.size(); ++i) {
    layer.weights.data()[i] = rng.uniform(-bound, bound);
  }
  // Biases start at zero.
  return layer;
}

LayerGrads LayerGrads::zeros_like(const ConvLayer& layer) {
  return {RowMatrixXd::Zero(layer.weights.rows(), layer.weights.cols()),
          Eigen::VectorXd::Zero(layer.bias.size())};
}

LayerGrads& LayerGrads::operator+=(const LayerGrads& other) {
  weights += other.weights;
  bias += other.bias;
  return *this;
}

Tensor4 conv2d_forward(const ConvLayer& layer, const Tensor4& input) {
  const auto& s = input.shape();
  if (s.c != layer.in_ch) {
    throw ShapeError("conv " + layer.name + ": input has " + std::to_string(s.c) +
                     " channels, expected " + std::to_string(layer.in_ch));
  }
  Tensor4 out(s.n, layer.out_ch, s.h, s.w);
  for (int n = 0; n < s.n; ++n) {
    auto y = out.sample(n);
    if (layer.kernel == 1) {
      y.noalias() = layer.weights * input.sample(n);
    } else {
      y.noalias() = layer.weights * im2col3(input.sample(n), s.c, s.h, s.w);
    }
    y.colwise() += layer.bias;
  }
  return out;
}

ConvGrads conv2d_backward(const ConvLayer& layer, const Tensor4& input,
                          const Tensor4& grad_output) {
  const auto& s = input.shape();
  if (s.c != layer.in_ch) throw ShapeError("conv " + layer.name + ": input channel mismatch");
  if (grad_output.shape() != Shape4{s.n, layer.out_ch, s.h, s.w}) {
    throw ShapeError("conv " + layer.name + ": gradient shape " +
                     to_string(grad_output.shape()) + " does not match forward output");
  }
  ConvGrads grads{Tensor4(s), LayerGrads::zeros_like(layer)};
  for (int n = 0; n < s.n; ++n) {
    auto dy = grad_output.sample(n);
    auto dx = grads.input.sample(n);
    grads.params.bias += dy.rowwise().sum();
    if (layer.kernel == 1) {
      grads.params.weights.noalias() += dy * input.sample(n).transpose();
      dx.noalias() = layer.weights.transpose() * dy;
    } else {
      const RowMatrixXd cols = im2col3(input.sample(n), s.c, s.h, s.w);
      grads.params.weights.noalias() += dy * cols.transpose();
      const RowMatrixXd dcols = layer.weights.transpose() * dy;
      col2im3(dcols, dx, s.c, s.h, s.w);
    }
  }
  return grads;
}

Tensor4 leaky_relu(const Tensor4& input, double alpha) {
  Tensor4 out(input.shape());
  out.data() = (input.data().array() >= 0.0).select(input.data(), alpha * input.data());
  return out;
}

Tensor4 leaky_relu_backward(const Tensor4& input, const Tensor4& grad_output, double alpha) {
  if (input.shape() != grad_output.shape()) {
    throw ShapeError("leaky_relu_backward: shape mismatch");
  }
  Tensor4 out(input.shape());
  out.data() =
      (input.data().array() >= 0.0).select(grad_output.data(), alpha * grad_output.data());
  return out;
}

OffsetPredictor OffsetPredictor::make(int in_ch, int hidden, int ratio, int groups,
                                      double slope, Rng& rng) {
  if (ratio < 1) throw ShapeError("offset predictor ratio must be >= 1");
  if (groups < 1) throw ShapeError("offset predictor needs at least one group");
  OffsetPredictor pred;
  pred.reduce = ConvLayer::uniform("offset_reduce", in_ch, hidden, 1, 0.0, rng);
  pred.expand = ConvLayer::zeros("offset_expand", hidden, 2 * groups * ratio * ratio, 3, 0.0);
  pred.slope = slope;
  pred.ratio = ratio;
  pred.groups = groups;
  return pred;
}

OffsetField offset_predictor_forward(const OffsetPredictor& pred, const Tensor4& features) {
  OffsetPredictorTrace trace;
  return offset_predictor_forward(pred, features, trace);
}

OffsetField offset_predictor_forward(const OffsetPredictor& pred, const Tensor4& features,
                                     OffsetPredictorTrace& trace) {
  trace.reduced = conv2d_forward(pred.reduce, features);
  trace.activated = leaky_relu(trace.reduced, pred.slope);
  const Tensor4 expanded = conv2d_forward(pred.expand, trace.activated);
  return OffsetField::from_interleaved(pixel_shuffle(expanded, pred.ratio));
}

OffsetPredictorGrads offset_predictor_backward(const OffsetPredictor& pred,
                                               const Tensor4& features,
                                               const OffsetPredictorTrace& trace,
                                               const OffsetField& grad_offsets) {
  const Tensor4 d_expanded = pixel_unshuffle(grad_offsets.to_interleaved(), pred.ratio);
  ConvGrads expand = conv2d_backward(pred.expand, trace.activated, d_expanded);
  const Tensor4 d_reduced = leaky_relu_backward(trace.reduced, expand.input, pred.slope);
  ConvGrads reduce = conv2d_backward(pred.reduce, features, d_reduced);
  return {std::move(reduce.input), std::move(reduce.params), std::move(expand.params)};
}

ToyDecoder ToyDecoder::make(int in_ch, int width, int classes, double slope,
                            double weight_decay, Rng& rng) {
  ToyDecoder dec;
  dec.conv1 = ConvLayer::uniform("decoder_conv1", in_ch, width, 3, weight_decay, rng);
  dec.conv2 = ConvLayer::uniform("decoder_conv2", width, width, 3, weight_decay, rng);
  dec.classifier = ConvLayer::uniform("classifier", width, classes, 1, weight_decay, rng);
  dec.slope = slope;
  return dec;
}

DecoderOutput toy_decoder_forward(const ToyDecoder& dec, const Tensor4& input) {
  DecoderTrace trace;
  return toy_decoder_forward(dec, input, trace);
}

DecoderOutput toy_decoder_forward(const ToyDecoder& dec, const Tensor4& input,
                                  DecoderTrace& trace) {
  trace.pre1 = conv2d_forward(dec.conv1, input);
  trace.act1 = leaky_relu(trace.pre1, dec.slope);
  trace.pre2 = conv2d_forward(dec.conv2, trace.act1);
  DecoderOutput out;
  out.features = leaky_relu(trace.pre2, dec.slope);
  out.logits = conv2d_forward(dec.classifier, out.features);
  return out;
}

DecoderGrads toy_decoder_backward(const ToyDecoder& dec, const Tensor4& input,
                                  const DecoderTrace& trace, const DecoderOutput& output,
                                  const Tensor4& grad_features, const Tensor4& grad_logits) {
  ConvGrads cls = conv2d_backward(dec.classifier, output.features, grad_logits);
  Tensor4 d_features = cls.input;
  d_features.data() += grad_features.data();
  const Tensor4 d_pre2 = leaky_relu_backward(trace.pre2, d_features, dec.slope);
  ConvGrads c2 = conv2d_backward(dec.conv2, trace.act1, d_pre2);
  const Tensor4 d_pre1 = leaky_relu_backward(trace.pre1, c2.input, dec.slope);
  ConvGrads c1 = conv2d_backward(dec.conv1, input, d_pre1);
  return {std::move(c1.params), std::move(c2.params), std::move(cls.params)};
}

double poly_lr(double base, long iter, long total, double power) {
  if (total <= 0) return base;
  const double frac = 1.0 - static_cast<double>(iter) / static_cast<double>(total);
  return base * std::pow(std::max(0.0, frac), power);
}

Velocity Velocity::zeros_like(const ConvLayer& layer) {
  return {RowMatrixXd::Zero(layer.weights.rows(), layer.weights.cols()),
          Eigen::VectorXd::Zero(layer.bias.size())};
}

void sgd_step(std::span<ConvLayer* const> layers, std::span<const LayerGrads> grads,
              std::vector<Velocity>& velocity, double lr, double momentum) {
  if (grads.size() != layers.size()) throw ShapeError("sgd_step: gradient count mismatch");
  if (velocity.empty()) {
    for (const auto* layer : layers) velocity.push_back(Velocity::zeros_like(*layer));
  }
  if (velocity.size() != layers.size()) throw ShapeError("sgd_step: velocity count mismatch");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    ConvLayer& layer = *layers[i];
    const LayerGrads& g = grads[i];
    Velocity& v = velocity[i];
    if (g.weights.rows() != layer.weights.rows() || g.weights.cols() != layer.weights.cols() ||
        g.bias.size() != layer.bias.size() || v.weights.rows() != layer.weights.rows() ||
        v.weights.cols() != layer.weights.cols() || v.bias.size() != layer.bias.size()) {
      throw ShapeError("sgd_step: buffer shape mismatch for layer " + layer.name);
    }
    v.weights = momentum * v.weights + (g.weights + layer.weight_decay * layer.weights);
    v.bias = momentum * v.bias + (g.bias + layer.weight_decay * layer.bias);
    layer.weights -= lr * v.weights;
    layer.bias -= lr * v.bias;
  }
}

}  // namespace lau
