#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "lau/network.hpp"
#include "lau/synth.hpp"
#include "lau/tensor.hpp"

namespace lau {

// Binary tensor dump: four little-endian uint32 dims (n, c, h, w) followed by
// n*c*h*w little-endian float64 values.
void write_tensor(std::ostream& os, const Tensor4& t);
Tensor4 read_tensor(std::istream& is);
void save_tensor(const std::filesystem::path& path, const Tensor4& t);
Tensor4 load_tensor(const std::filesystem::path& path);

// Label dump: same 16-byte header with c = 1, then little-endian int32 labels.
void write_labels(std::ostream& os, const LabelMap& labels);
LabelMap read_labels(std::istream& is, int num_classes, int ignore_value = -1);

/// Writes sample_NNNN.features.bin and sample_NNNN.labels.bin per sample.
void save_dataset(const std::filesystem::path& dir, const std::vector<SynthSample>& samples);

/// Binary PPM (P6) of image `index` with the fixed 16-colour palette.
void write_ppm(std::ostream& os, const LabelMap& labels, int index = 0);
void save_ppm(const std::filesystem::path& path, const LabelMap& labels, int index = 0);

/// Colour of a class id; ignore and out-of-range ids wrap into the palette.
std::array<unsigned char, 3> palette_color(int label);

// Checkpoint: one text manifest line listing each layer as name:OxIxKxK,
// then per layer the weight tensor (O, I, K, K) and the bias tensor
// (1, O, 1, 1) as binary tensor dumps, in Network::layers() order.
void save_checkpoint(const std::filesystem::path& path, const Network& net);
/// Loads weights into `net`, whose layer names and shapes must match.
void load_checkpoint(const std::filesystem::path& path, Network& net);
std::string checkpoint_manifest(const Network& net);

}  // namespace lau
