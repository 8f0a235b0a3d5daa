#include "lau/train.hpp"

#include <cmath>
#include <numeric>

#include "lau/optim.hpp"

namespace lau {

namespace {

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field + ": " + what);
}

// Stream ids for the independent random streams of one run.
constexpr std::uint64_t kInitStream = 0x696e6974;
constexpr std::uint64_t kShuffleStream = 0x73687566;

void place_predictions(LabelMap& all, const LabelMap& batch_pred,
                       const std::vector<std::size_t>& order, std::size_t begin) {
  const std::size_t plane = static_cast<std::size_t>(all.h) * all.w;
  for (int b = 0; b < batch_pred.n; ++b) {
    std::copy_n(batch_pred.labels.begin() + static_cast<std::ptrdiff_t>(b * plane), plane,
                all.labels.begin() + static_cast<std::ptrdiff_t>(order[begin + b] * plane));
  }
}

EpochMetrics score(int epoch, const std::string& split, double loss, const LabelMap& pred,
                   const LabelMap& gt, int classes) {
  EpochMetrics m;
  m.epoch = epoch;
  m.split = split;
  m.loss = loss;
  m.pixacc = pix_acc(pred, gt);
  m.miou = miou(pred, gt, classes);
  m.speckle = speckle_rate(pred);
  return m;
}

LabelMap stack_labels(const std::vector<SynthSample>& samples) {
  std::vector<const LabelMap*> parts;
  parts.reserve(samples.size());
  for (const auto& s : samples) parts.push_back(&s.labels);
  return concat_batch(parts);
}

}  // namespace

void TrainConfig::validate() const {
  require(classes >= 2, "classes", "must be >= 2");
  require(output_stride >= 1, "output_stride", "must be >= 1");
  require(image_size >= 3, "image_size", "must be >= 3");
  require(image_size % output_stride == 0, "image_size",
          std::to_string(image_size) + " not divisible by output_stride " +
              std::to_string(output_stride));
  require(noise_std >= 0.0 && std::isfinite(noise_std), "noise_std", "must be >= 0");
  require(train_count >= 1, "train_count", "must be >= 1");
  require(val_count >= 1, "val_count", "must be >= 1");
  require(lau_ratio >= 1, "lau_ratio", "must be >= 1");
  require(output_stride % lau_ratio == 0, "lau_ratio",
          std::to_string(lau_ratio) + " does not divide output_stride " +
              std::to_string(output_stride));
  require(m_channels == 1 || m_channels == classes, "m_channels", "must be 1 or classes");
  require(loss != LossKind::kReg || m_channels == 1, "m_channels",
          "the regression loss needs shared offsets (m_channels = 1)");
  require(c_prime >= 1, "c_prime", "must be >= 1");
  require(decoder_channels >= 1, "decoder_channels", "must be >= 1");
  require(leaky_slope >= 0.0 && leaky_slope < 1.0, "leaky_slope", "must be in [0, 1)");
  require(lambda >= 0.0 && std::isfinite(lambda), "lambda", "must be >= 0");
  require(gamma >= 0.0 && std::isfinite(gamma), "gamma", "must be >= 0");
  require(lr >= 0.0 && std::isfinite(lr), "lr", "must be >= 0");
  require(power > 0.0 && std::isfinite(power), "power", "must be > 0");
  require(momentum >= 0.0 && momentum < 1.0, "momentum", "must be in [0, 1)");
  require(weight_decay >= 0.0 && std::isfinite(weight_decay), "weight_decay", "must be >= 0");
  require(epochs >= 1, "epochs", "must be >= 1");
  require(batch >= 1, "batch", "must be >= 1");
  pipeline().validate();
}

PipelineSettings TrainConfig::pipeline() const {
  PipelineSettings s;
  s.upsampler = upsampler;
  s.loss = loss;
  s.lau_ratio = lau_ratio;
  s.total_ratio = output_stride;
  s.lambda = lambda;
  s.gamma = gamma;
  return s;
}

SynthParams TrainConfig::synth() const {
  return SynthParams{seed, image_size, image_size, classes, output_stride, noise_std};
}

NetworkShape TrainConfig::network_shape() const {
  NetworkShape shape;
  shape.in_channels = classes;
  shape.classes = classes;
  shape.decoder_width = decoder_channels;
  shape.hidden = c_prime;
  shape.groups = m_channels;
  shape.lau_ratio = lau_ratio;
  shape.slope = leaky_slope;
  shape.weight_decay = weight_decay;
  shape.with_offsets = upsampler == UpsamplerKind::kLau;
  return shape;
}

long TrainConfig::iterations_per_epoch() const { return (train_count + batch - 1) / batch; }

Batch make_batch(const std::vector<SynthSample>& samples, const std::vector<std::size_t>& order,
                 std::size_t begin, std::size_t end) {
  std::vector<const Tensor4*> feats;
  std::vector<const LabelMap*> labels;
  for (std::size_t i = begin; i < end; ++i) {
    feats.push_back(&samples[order[i]].features);
    labels.push_back(&samples[order[i]].labels);
  }
  return {concat_batch(feats), concat_batch(labels)};
}

EvalResult evaluate(const Network& net, const PipelineSettings& settings,
                    const std::vector<SynthSample>& samples, int batch) {
  if (samples.empty()) throw ConfigError("evaluate: empty split");
  const LabelMap gt = stack_labels(samples);
  LabelMap pred = gt;
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  double loss_sum = 0.0;
  for (std::size_t begin = 0; begin < samples.size(); begin += static_cast<std::size_t>(batch)) {
    const std::size_t end = std::min(samples.size(), begin + static_cast<std::size_t>(batch));
    const Batch b = make_batch(samples, order, begin, end);
    const Tensor4 logits = predict_logits(net, b.features, settings);
    loss_sum += reduce_loss(cross_entropy_map(logits, b.labels)) * static_cast<double>(end - begin);
    place_predictions(pred, argmax_labels(logits), order, begin);
  }
  EvalResult out;
  out.metrics = score(0, "val", loss_sum / static_cast<double>(samples.size()), pred, gt,
                      gt.num_classes);
  out.predictions = std::move(pred);
  return out;
}

Network initial_network(const TrainConfig& config) {
  config.validate();
  Rng init(mix_seed(config.seed, kInitStream));
  return make_network(config.network_shape(), init);
}

TrainResult train(const TrainConfig& config, const std::vector<SynthSample>& train_set,
                  const std::vector<SynthSample>& val_set, const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty() || val_set.empty()) throw ConfigError("train: empty dataset split");
  const PipelineSettings settings = config.pipeline();
  TrainResult result{initial_network(config), {}};
  Network& net = result.net;
  Rng shuffle(mix_seed(config.seed, kShuffleStream));

  const LabelMap train_gt = stack_labels(train_set);
  const auto count = train_set.size();
  const auto batch = static_cast<std::size_t>(config.batch);
  const long total = static_cast<long>((count + batch - 1) / batch) * config.epochs;
  std::vector<Velocity> velocity;
  std::vector<std::size_t> order(count);
  long iter = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = count; i > 1; --i) {
      const auto j = static_cast<std::size_t>(shuffle.uniform_int(0, static_cast<int>(i - 1)));
      std::swap(order[i - 1], order[j]);
    }
    LabelMap train_pred = train_gt;
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < count; begin += batch) {
      const std::size_t end = std::min(count, begin + batch);
      const Batch b = make_batch(train_set, order, begin, end);
      const PipelineResult step = run_pipeline(net, b.features, b.labels, settings, true);
      loss_sum += step.loss * static_cast<double>(end - begin);
      place_predictions(train_pred, argmax_labels(step.logits), order, begin);
      const double lr = poly_lr(config.lr, iter, total, config.power);
      auto layers = net.layers();
      sgd_step(layers, step.grads, velocity, lr, config.momentum);
      ++iter;
    }
    EpochMetrics train_metrics = score(epoch, "train", loss_sum / static_cast<double>(count),
                                       train_pred, train_gt, config.classes);
    EpochMetrics val_metrics = evaluate(net, settings, val_set, config.batch).metrics;
    val_metrics.epoch = epoch;
    result.history.push_back(train_metrics);
    result.history.push_back(val_metrics);
    if (on_epoch) {
      on_epoch(train_metrics);
      on_epoch(val_metrics);
    }
  }
  return result;
}

TrainResult train(const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  const SynthParams params = config.synth();
  const auto train_set = gen_dataset(params, config.train_count, 0);
  const auto val_set =
      gen_dataset(params, config.val_count, static_cast<std::uint64_t>(config.train_count));
  return train(config, train_set, val_set, on_epoch);
}

}  // namespace lau
