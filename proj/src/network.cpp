#include "lau/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lau {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double activation_margin(const Tensor4& pre) { return pre.data().cwiseAbs().minCoeff(); }

// Distance of each raw source coordinate from the tent kernel's kinks: the
// integer lattice inside the grid, the clamp boundary outside it.
double coordinate_margin(const Shape4& in, const OffsetField& off, int k) {
  double margin = kInf;
  auto axis = [](double p, int extent) {
    const double upper = extent - 1;
    if (p <= 0.0) return -p;
    if (p >= upper) return p - upper;
    const double frac = p - std::floor(p);
    return std::min(frac, 1.0 - frac);
  };
  for (int n = 0; n < off.n(); ++n) {
    for (int g = 0; g < off.groups(); ++g) {
      for (int y = 0; y < off.h(); ++y) {
        for (int x = 0; x < off.w(); ++x) {
          margin = std::min(margin, axis(static_cast<double>(x) / k + off.dx(n, g, y, x), in.w));
          margin = std::min(margin, axis(static_cast<double>(y) / k + off.dy(n, g, y, x), in.h));
        }
      }
    }
  }
  return margin;
}

double weighted_mean(const LossMap& map, const Eigen::ArrayXd& weights) {
  const Eigen::Index count = valid_count(map);
  if (count == 0) throw EmptyReductionError("pipeline: no valid pixels");
  return map.valid.select(map.values * weights, 0.0).sum() / static_cast<double>(count);
}

}  // namespace

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kCe: return "ce";
    case LossKind::kOff: return "off";
    case LossKind::kReg: return "reg";
  }
  return "?";
}

std::string to_string(UpsamplerKind kind) {
  return kind == UpsamplerKind::kLau ? "lau" : "bilinear";
}

LossKind parse_loss_kind(const std::string& name) {
  if (name == "ce") return LossKind::kCe;
  if (name == "off") return LossKind::kOff;
  if (name == "reg") return LossKind::kReg;
  throw ConfigError("loss: expected one of ce, off, reg, got '" + name + "'");
}

UpsamplerKind parse_upsampler_kind(const std::string& name) {
  if (name == "lau") return UpsamplerKind::kLau;
  if (name == "bilinear") return UpsamplerKind::kBilinear;
  throw ConfigError("upsampler: expected lau or bilinear, got '" + name + "'");
}

void PipelineSettings::validate() const {
  if (lau_ratio < 1) throw ConfigError("lau_ratio: must be >= 1");
  if (total_ratio < 1) throw ConfigError("output_stride: must be >= 1");
  if (total_ratio % lau_ratio != 0) {
    throw ConfigError("lau_ratio: " + std::to_string(lau_ratio) + " does not divide output_stride " +
                      std::to_string(total_ratio));
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda: must be >= 0");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma: must be >= 0");
  if (upsampler == UpsamplerKind::kBilinear && loss != LossKind::kCe) {
    throw ConfigError("loss: '" + to_string(loss) + "' requires the lau upsampler");
  }
}

std::vector<ConvLayer*> Network::layers() {
  std::vector<ConvLayer*> out{&decoder.conv1, &decoder.conv2, &decoder.classifier};
  if (offsets) {
    out.push_back(&offsets->reduce);
    out.push_back(&offsets->expand);
  }
  return out;
}

std::vector<const ConvLayer*> Network::layers() const {
  std::vector<const ConvLayer*> out{&decoder.conv1, &decoder.conv2, &decoder.classifier};
  if (offsets) {
    out.push_back(&offsets->reduce);
    out.push_back(&offsets->expand);
  }
  return out;
}

Network make_network(const NetworkShape& shape, Rng& rng) {
  Network net;
  net.decoder = ToyDecoder::make(shape.in_channels, shape.decoder_width, shape.classes,
                                 shape.slope, shape.weight_decay, rng);
  if (shape.with_offsets) {
    net.offsets = OffsetPredictor::make(shape.decoder_width, shape.hidden, shape.lau_ratio,
                                        shape.groups, shape.slope, rng);
  }
  return net;
}

Tensor4 predict_logits(const Network& net, const Tensor4& features,
                       const PipelineSettings& settings) {
  const DecoderOutput dec = toy_decoder_forward(net.decoder, features);
  Tensor4 stage;
  if (settings.upsampler == UpsamplerKind::kLau) {
    if (!net.offsets) throw ConfigError("upsampler: lau requires an offset branch");
    const OffsetField off = offset_predictor_forward(*net.offsets, dec.features);
    stage = lau_forward(dec.logits, off, settings.lau_ratio);
  } else {
    stage = bilinear_upsample(dec.logits, settings.lau_ratio);
  }
  return bilinear_upsample(stage, settings.residual_ratio());
}

PipelineResult run_pipeline(const Network& net, const Tensor4& features,
                            const LabelMap& labels, const PipelineSettings& settings,
                            bool with_grads) {
  settings.validate();
  const bool use_lau = settings.upsampler == UpsamplerKind::kLau;
  if (use_lau && !net.offsets) throw ConfigError("upsampler: lau requires an offset branch");
  const int k = settings.lau_ratio;
  const int s = settings.residual_ratio();

  PipelineResult result;
  DecoderTrace dec_trace;
  const DecoderOutput dec = toy_decoder_forward(net.decoder, features, dec_trace);
  const Tensor4& U = dec.logits;
  result.kink_margin =
      std::min(activation_margin(dec_trace.pre1), activation_margin(dec_trace.pre2));

  OffsetPredictorTrace off_trace;
  Tensor4 stage;
  if (use_lau) {
    result.offsets = offset_predictor_forward(*net.offsets, dec.features, off_trace);
    result.kink_margin = std::min({result.kink_margin, activation_margin(off_trace.reduced),
                                   coordinate_margin(U.shape(), result.offsets, k)});
    stage = lau_forward(U, result.offsets, k);
  } else {
    stage = bilinear_upsample(U, k);
  }
  result.logits = bilinear_upsample(stage, s);
  const LossMap loss = cross_entropy_map(result.logits, labels);
  result.ce_loss = reduce_loss(loss);

  const auto to_full = [s](const Tensor4& t) { return bilinear_upsample(t, s); };
  Eigen::ArrayXd weights = Eigen::ArrayXd::Ones(loss.size());
  // Regression-term state at the LaU resolution.
  CoordinateMap own_coords;
  CoordinateMap theta_opt;
  LossMap coarse_own;
  double regression_term = 0.0;

  switch (settings.loss) {
    case LossKind::kCe:
      break;
    case LossKind::kOff: {
      const LossMap aux = cross_entropy_map(to_full(bilinear_upsample(U, k)), labels);
      weights = offset_guided_weights(loss, aux, settings.lambda);
      result.kink_margin = std::min(result.kink_margin, switch_margin(loss, aux));
      break;
    }
    case LossKind::kReg: {
      std::array<LossMap, kNumCandidates> full;
      full[0] = loss;
      for (int i = 0; i < 4; ++i) {
        full[i + 1] = cross_entropy_map(to_full(corner_upsample(U, k, kCandidateCorners[i])), labels);
      }
      weights = candidate_weights(full, settings.lambda);
      // Pixel (s y, s x) of the full-resolution map reproduces LaU-resolution
      // pixel (y, x) exactly, so the coarse loss set is a strided view.
      CandidateSet coarse;
      for (int i = 0; i < kNumCandidates; ++i) coarse.losses[i] = subsample(full[i], s);
      coarse.coords = candidate_coords(U.shape(), result.offsets, k);
      theta_opt = select_theta_opt(coarse);
      own_coords = coarse.coords[0];
      coarse_own = coarse.losses[0];
      const LossMap sl1 = smooth_l1(theta_opt, own_coords);
      const Eigen::Index coarse_valid = valid_count(coarse_own);
      if (coarse_valid > 0) {
        regression_term = coarse_own.valid.select(sl1.values, 0.0).sum() / coarse_valid;
      }

      result.kink_margin = std::min(
          {result.kink_margin, candidate_margin(full), candidate_margin(coarse.losses)});
      break;
    }
  }
  result.loss = weighted_mean(loss, weights) + settings.gamma * regression_term;
  if (!with_grads) return result;

  // Backward.
  const double inv_count = 1.0 / static_cast<double>(valid_count(loss));
  const Tensor4 d_logits = cross_entropy_backward(result.logits, labels, weights * inv_count);
  const Tensor4 d_stage = bilinear_upsample_backward(d_logits, stage.shape(), s);

  Tensor4 d_features(dec.features.shape());
  Tensor4 d_U;
  std::optional<OffsetPredictorGrads> off_grads;
  if (use_lau) {
    LauGrads lg = lau_backward(U, result.offsets, k, d_stage);
    if (settings.loss == LossKind::kReg) {
      const Eigen::Index coarse_valid = valid_count(coarse_own);
      if (coarse_valid > 0) {
        const CoordinateGrad cg = smooth_l1_grad(own_coords, theta_opt);
        const double scale = settings.gamma / static_cast<double>(coarse_valid);
        lg.offsets.dx.data().array() += coarse_own.valid.select(scale * cg.gx, 0.0);
        lg.offsets.dy.data().array() += coarse_own.valid.select(scale * cg.gy, 0.0);
      }
    }
    d_U = std::move(lg.input);
    off_grads = offset_predictor_backward(*net.offsets, dec.features, off_trace, lg.offsets);
    d_features = off_grads->features;
  } else {
    d_U = bilinear_upsample_backward(d_stage, U.shape(), k);
  }
  DecoderGrads dg = toy_decoder_backward(net.decoder, features, dec_trace, dec, d_features, d_U);
  result.grads = {std::move(dg.conv1), std::move(dg.conv2), std::move(dg.classifier)};
  if (off_grads) {
    result.grads.push_back(std::move(off_grads->reduce));
    result.grads.push_back(std::move(off_grads->expand));
  } else if (net.offsets) {
    // Offset branch unused by the bilinear upsampler.
    result.grads.push_back(LayerGrads::zeros_like(net.offsets->reduce));
    result.grads.push_back(LayerGrads::zeros_like(net.offsets->expand));
  }
  return result;
}

}  // namespace lau

namespace lau {

Eigen::VectorXd flatten_parameters(const Network& net) {
  Eigen::Index total = 0;
  for (const auto* layer : net.layers()) total += layer->parameter_count();
  Eigen::VectorXd flat(total);
  Eigen::Index pos = 0;
  for (const auto* layer : net.layers()) {
    flat.segment(pos, layer->weights.size()) =
        Eigen::Map<const Eigen::VectorXd>(layer->weights.data(), layer->weights.size());
    pos += layer->weights.size();
    flat.segment(pos, layer->bias.size()) = layer->bias;
    pos += layer->bias.size();
  }
  return flat;
}

void assign_parameters(Network& net, const Eigen::VectorXd& flat) {
  Eigen::Index total = 0;
  for (const auto* layer : net.layers()) total += layer->parameter_count();
  if (flat.size() != total) throw ShapeError("assign_parameters: size mismatch");
  Eigen::Index pos = 0;
  for (auto* layer : net.layers()) {
    Eigen::Map<Eigen::VectorXd>(layer->weights.data(), layer->weights.size()) =
        flat.segment(pos, layer->weights.size());
    pos += layer->weights.size();
    layer->bias = flat.segment(pos, layer->bias.size());
    pos += layer->bias.size();
  }
}

Eigen::VectorXd flatten_gradients(const std::vector<LayerGrads>& grads) {
  Eigen::Index total = 0;
  for (const auto& g : grads) total += g.weights.size() + g.bias.size();
  Eigen::VectorXd flat(total);
  Eigen::Index pos = 0;
  for (const auto& g : grads) {
    flat.segment(pos, g.weights.size()) =
        Eigen::Map<const Eigen::VectorXd>(g.weights.data(), g.weights.size());
    pos += g.weights.size();
    flat.segment(pos, g.bias.size()) = g.bias;
    pos += g.bias.size();
  }
  return flat;
}

}  // namespace lau
