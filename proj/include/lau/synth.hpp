#pragma once

#include <cstdint>
#include <vector>

#include "lau/tensor.hpp"

namespace lau {

/// Low-resolution noisy one-hot features with their full-resolution labels.
struct SynthSample {
  Tensor4 features;  // (1, C, H / K, W / K)
  LabelMap labels;   // (1, H, W)
};

struct SynthParams {
  std::uint64_t seed = 0;
  int height = 64;
  int width = 64;
  int classes = 4;
  int stride = 8;  // K
  double noise_std = 0.25;

  /// Throws ConfigError on indivisible dims or fewer than two classes.
  void validate() const;
};

/// Sample `index` of the stream; depends only on (params, index).
SynthSample gen_sample(const SynthParams& params, std::uint64_t index);

/// Samples first_index .. first_index + count - 1.
std::vector<SynthSample> gen_dataset(const SynthParams& params, int count,
                                     std::uint64_t first_index = 0);
std::vector<SynthSample> gen_dataset(std::uint64_t seed, int count, int height, int width,
                                     int classes, int stride, double noise_std);

/// Mode of each stride x stride cell; ties go to the smaller class.
LabelMap majority_pool(const LabelMap& labels, int stride);

double pix_acc(const LabelMap& pred, const LabelMap& gt);

/// Mean IoU over classes present in gt or pred; ignored gt pixels are skipped.
double miou(const LabelMap& pred, const LabelMap& gt, int num_classes);

/// Fraction of interior pixels whose label differs from all four neighbours.
double speckle_rate(const LabelMap& pred);

}  // namespace lau
