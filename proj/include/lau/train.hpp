#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lau/network.hpp"
#include "lau/synth.hpp"

namespace lau {

/// Every knob of one reproducible training run, dataset included.
struct TrainConfig {
  std::uint64_t seed = 0;
  // Data.
  int classes = 4;
  int image_size = 64;
  int output_stride = 8;  // K
  double noise_std = 0.25;
  int train_count = 256;
  int val_count = 64;
  // Model.
  UpsamplerKind upsampler = UpsamplerKind::kLau;
  int lau_ratio = 4;  // k
  int m_channels = 1;
  int c_prime = 64;
  int decoder_channels = 16;
  double leaky_slope = 0.01;
  // Objective.
  LossKind loss = LossKind::kOff;
  double lambda = 0.3;
  double gamma = 0.1;
  // Optimizer.
  double lr = 0.001;
  double power = 0.9;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int epochs = 30;
  int batch = 8;

  /// Throws ConfigError naming the first offending field.
  void validate() const;

  PipelineSettings pipeline() const;
  SynthParams synth() const;
  NetworkShape network_shape() const;
  long iterations_per_epoch() const;
  long total_iters() const { return iterations_per_epoch() * epochs; }
};

struct EpochMetrics {
  int epoch = 0;
  std::string split;  // "train" or "val"
  double loss = 0.0;
  double pixacc = 0.0;
  double miou = 0.0;
  double speckle = 0.0;
};

struct EvalResult {
  EpochMetrics metrics;
  LabelMap predictions;
};

/// Inference over `samples`; loss is the plain cross entropy of the final
/// logits (auxiliary paths are not evaluated).
EvalResult evaluate(const Network& net, const PipelineSettings& settings,
                    const std::vector<SynthSample>& samples, int batch);

struct TrainResult {
  Network net;
  std::vector<EpochMetrics> history;  // train then val row per epoch
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Deterministic SGD training. Train-split metrics come from the predictions
/// made during the epoch; the train loss is the mean objective.
TrainResult train(const TrainConfig& config, const std::vector<SynthSample>& train_set,
                  const std::vector<SynthSample>& val_set, const EpochCallback& on_epoch = {});

/// Generates the train/val splits from the config and trains.
TrainResult train(const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Builds the initial network for a config (same draw order as train()).
Network initial_network(const TrainConfig& config);

/// Stacks samples [begin, end) in `order` into one batch.
struct Batch {
  Tensor4 features;
  LabelMap labels;
};
Batch make_batch(const std::vector<SynthSample>& samples, const std::vector<std::size_t>& order,
                 std::size_t begin, std::size_t end);

}  // namespace lau
