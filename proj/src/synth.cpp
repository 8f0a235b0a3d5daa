#include "lau/synth.hpp"

#include <algorithm>
#include <set>

#include "lau/rng.hpp"

namespace lau {

namespace {

void check_pair(const LabelMap& pred, const LabelMap& gt) {
  if (pred.n != gt.n || pred.h != gt.h || pred.w != gt.w || pred.size() != gt.size()) {
    throw ShapeError("label maps differ in size");
  }
}

bool has_two_classes(const LabelMap& labels) {
  for (auto v : labels.labels) {
    if (v != labels.labels.front()) return true;
  }
  return false;
}

void paint_shape(LabelMap& labels, Rng& rng, int cls) {
  const int H = labels.h;
  const int W = labels.w;
  if (rng.uniform() < 0.5) {
    const int rh = rng.uniform_int(std::max(1, H / 8), std::max(1, H / 2));
    const int rw = rng.uniform_int(std::max(1, W / 8), std::max(1, W / 2));
    const int y0 = rng.uniform_int(0, H - rh);
    const int x0 = rng.uniform_int(0, W - rw);
    for (int y = y0; y < y0 + rh; ++y) {
      for (int x = x0; x < x0 + rw; ++x) labels(0, y, x) = cls;
    }
  } else {
    const int r = rng.uniform_int(std::max(1, std::min(H, W) / 16), std::max(1, std::min(H, W) / 4));
    const double cy = rng.uniform(0.0, H);
    const double cx = rng.uniform(0.0, W);
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        const double dy = y + 0.5 - cy;
        const double dx = x + 0.5 - cx;
        if (dx * dx + dy * dy <= static_cast<double>(r) * r) labels(0, y, x) = cls;
      }
    }
  }
}

}  // namespace

void SynthParams::validate() const {
  if (classes < 2) throw ConfigError("classes: must be >= 2");
  if (stride < 1) throw ConfigError("output_stride: must be >= 1");
  if (height < 1 || width < 1) throw ConfigError("image_size: must be >= 1");
  if (height % stride != 0 || width % stride != 0) {
    throw ConfigError("image_size: " + std::to_string(height) + "x" + std::to_string(width) +
                      " not divisible by output_stride " + std::to_string(stride));
  }
  if (height < 2 && width < 2) throw ConfigError("image_size: too small for two classes");
  if (!(noise_std >= 0.0)) throw ConfigError("noise_std: must be >= 0");
}

SynthSample gen_sample(const SynthParams& params, std::uint64_t index) {
  params.validate();
  Rng rng(mix_seed(params.seed, index));
  LabelMap labels(1, params.height, params.width, params.classes, 0);
  // Redraw until at least two classes (hence a boundary) are present.
  do {
    std::fill(labels.labels.begin(), labels.labels.end(), 0);
    const int shapes = rng.uniform_int(2, 5);
    for (int s = 0; s < shapes; ++s) paint_shape(labels, rng, rng.uniform_int(1, params.classes - 1));
  } while (!has_two_classes(labels));

  const LabelMap pooled = majority_pool(labels, params.stride);
  Tensor4 features(1, params.classes, pooled.h, pooled.w);
  for (int c = 0; c < params.classes; ++c) {
    for (int y = 0; y < pooled.h; ++y) {
      for (int x = 0; x < pooled.w; ++x) {
        const double onehot = pooled(0, y, x) == c ? 1.0 : 0.0;
        features(0, c, y, x) = onehot + rng.normal(0.0, params.noise_std);
      }
    }
  }
  return {std::move(features), std::move(labels)};
}

std::vector<SynthSample> gen_dataset(const SynthParams& params, int count,
                                     std::uint64_t first_index) {
  params.validate();
  if (count < 0) throw ConfigError("sample count must be >= 0");
  std::vector<SynthSample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(gen_sample(params, first_index + i));
  return out;
}

std::vector<SynthSample> gen_dataset(std::uint64_t seed, int count, int height, int width,
                                     int classes, int stride, double noise_std) {
  return gen_dataset(SynthParams{seed, height, width, classes, stride, noise_std}, count);
}

LabelMap majority_pool(const LabelMap& labels, int stride) {
  if (stride < 1 || labels.h % stride != 0 || labels.w % stride != 0) {
    throw ShapeError("majority_pool: dims not divisible by stride");
  }
  LabelMap out(labels.n, labels.h / stride, labels.w / stride, labels.num_classes, 0,
               labels.ignore_value);
  std::vector<int> counts(static_cast<std::size_t>(labels.num_classes));
  for (int n = 0; n < labels.n; ++n) {
    for (int y = 0; y < out.h; ++y) {
      for (int x = 0; x < out.w; ++x) {
        std::fill(counts.begin(), counts.end(), 0);
        for (int dy = 0; dy < stride; ++dy) {
          for (int dx = 0; dx < stride; ++dx) {
            const int v = labels(n, y * stride + dy, x * stride + dx);
            if (v != labels.ignore_value) ++counts[static_cast<std::size_t>(v)];
          }
        }
        const auto best = std::max_element(counts.begin(), counts.end());
        out(n, y, x) = *best == 0 ? labels.ignore_value
                                  : static_cast<std::int32_t>(best - counts.begin());
      }
    }
  }
  return out;
}

double pix_acc(const LabelMap& pred, const LabelMap& gt) {
  check_pair(pred, gt);
  std::size_t valid = 0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt.is_ignored(i)) continue;
    ++valid;
    if (pred.labels[i] == gt.labels[i]) ++correct;
  }
  return valid == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(valid);
}

double miou(const LabelMap& pred, const LabelMap& gt, int num_classes) {
  check_pair(pred, gt);
  if (num_classes < 1) throw ShapeError("miou: num_classes must be >= 1");
  std::vector<std::size_t> inter(static_cast<std::size_t>(num_classes), 0);
  std::vector<std::size_t> uni(static_cast<std::size_t>(num_classes), 0);
  auto in_range = [num_classes](int v) { return v >= 0 && v < num_classes; };
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt.is_ignored(i) || pred.labels[i] == pred.ignore_value) continue;
    const int g = gt.labels[i];
    const int p = pred.labels[i];
    if (g == p) {
      if (in_range(g)) {
        ++inter[g];
        ++uni[g];
      }
    } else {
      if (in_range(g)) ++uni[g];
      if (in_range(p)) ++uni[p];
    }
  }
  double total = 0.0;
  int present = 0;
  for (int c = 0; c < num_classes; ++c) {
    if (uni[c] == 0) continue;
    total += static_cast<double>(inter[c]) / static_cast<double>(uni[c]);
    ++present;
  }
  return present == 0 ? 0.0 : total / present;
}

double speckle_rate(const LabelMap& pred) {
  if (pred.h < 3 || pred.w < 3) throw ShapeError("speckle_rate: map must be at least 3x3");
  std::size_t isolated = 0;
  std::size_t interior = 0;
  for (int n = 0; n < pred.n; ++n) {
    for (int y = 1; y + 1 < pred.h; ++y) {
      for (int x = 1; x + 1 < pred.w; ++x) {
        const int v = pred(n, y, x);
        ++interior;
        if (v != pred(n, y - 1, x) && v != pred(n, y + 1, x) && v != pred(n, y, x - 1) &&
            v != pred(n, y, x + 1)) {
          ++isolated;
        }
      }
    }
  }
  return static_cast<double>(isolated) / static_cast<double>(interior);
}

}  // namespace lau
