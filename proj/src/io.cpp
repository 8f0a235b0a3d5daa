#include "lau/io.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace lau {

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                              static_cast<char>((v >> 16) & 0xFF),
                              static_cast<char>((v >> 24) & 0xFF)};
  os.write(b.data(), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b.data(), 8);
}

std::uint32_t get_u32(std::istream& is) {
  std::array<unsigned char, 4> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 4)) throw IoError("unexpected end of data");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& is) {
  std::array<unsigned char, 8> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 8)) throw IoError("unexpected end of data");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

Shape4 read_header(std::istream& is) {
  Shape4 s;
  s.n = static_cast<int>(get_u32(is));
  s.c = static_cast<int>(get_u32(is));
  s.h = static_cast<int>(get_u32(is));
  s.w = static_cast<int>(get_u32(is));
  if (!s.valid()) throw IoError("invalid dimensions in header " + to_string(s));
  return s;
}

void write_header(std::ostream& os, const Shape4& s) {
  put_u32(os, static_cast<std::uint32_t>(s.n));
  put_u32(os, static_cast<std::uint32_t>(s.c));
  put_u32(os, static_cast<std::uint32_t>(s.h));
  put_u32(os, static_cast<std::uint32_t>(s.w));
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return is;
}

constexpr std::array<std::array<unsigned char, 3>, 16> kPalette = {{
    {0, 0, 0},       {128, 0, 0},   {0, 128, 0},     {128, 128, 0},
    {0, 0, 128},     {128, 0, 128}, {0, 128, 128},   {128, 128, 128},
    {64, 0, 0},      {192, 0, 0},   {64, 128, 0},    {192, 128, 0},
    {64, 0, 128},    {192, 0, 128}, {64, 128, 128},  {255, 255, 255},
}};

}  // namespace

void write_tensor(std::ostream& os, const Tensor4& t) {
  write_header(os, t.shape());
  for (Eigen::Index i = 0; i < t.data().size(); ++i) {
    put_u64(os, std::bit_cast<std::uint64_t>(t.data()[i]));
  }
  if (!os) throw IoError("failed to write tensor");
}

Tensor4 read_tensor(std::istream& is) {
  const Shape4 shape = read_header(is);
  Tensor4 t(shape);
  for (Eigen::Index i = 0; i < t.data().size(); ++i) {
    t.data()[i] = std::bit_cast<double>(get_u64(is));
  }
  return t;
}

void save_tensor(const std::filesystem::path& path, const Tensor4& t) {
  auto os = open_out(path);
  write_tensor(os, t);
}

Tensor4 load_tensor(const std::filesystem::path& path) {
  auto is = open_in(path);
  return read_tensor(is);
}

void write_labels(std::ostream& os, const LabelMap& labels) {
  write_header(os, Shape4{labels.n, 1, labels.h, labels.w});
  for (auto v : labels.labels) put_u32(os, static_cast<std::uint32_t>(v));
  if (!os) throw IoError("failed to write labels");
}

LabelMap read_labels(std::istream& is, int num_classes, int ignore_value) {
  const Shape4 s = read_header(is);
  if (s.c != 1) throw IoError("label dump must have c = 1");
  LabelMap labels(s.n, s.h, s.w, num_classes, 0, ignore_value);
  for (auto& v : labels.labels) v = static_cast<std::int32_t>(get_u32(is));
  labels.validate();
  return labels;
}

void save_dataset(const std::filesystem::path& dir, const std::vector<SynthSample>& samples) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof(stem), "sample_%04zu", i);
    save_tensor(dir / (std::string(stem) + ".features.bin"), samples[i].features);
    auto os = open_out(dir / (std::string(stem) + ".labels.bin"));
    write_labels(os, samples[i].labels);
  }
}

std::array<unsigned char, 3> palette_color(int label) {
  const int idx = ((label % 16) + 16) % 16;
  return kPalette[static_cast<std::size_t>(idx)];
}

void write_ppm(std::ostream& os, const LabelMap& labels, int index) {
  if (index < 0 || index >= labels.n) throw IndexError("ppm: image index out of range");
  os << "P6\n" << labels.w << " " << labels.h << "\n255\n";
  for (int y = 0; y < labels.h; ++y) {
    for (int x = 0; x < labels.w; ++x) {
      const auto rgb = palette_color(labels(index, y, x));
      os.write(reinterpret_cast<const char*>(rgb.data()), 3);
    }
  }
  if (!os) throw IoError("failed to write ppm");
}

void save_ppm(const std::filesystem::path& path, const LabelMap& labels, int index) {
  auto os = open_out(path);
  write_ppm(os, labels, index);
}

std::string checkpoint_manifest(const Network& net) {
  std::ostringstream os;
  os << "lau-checkpoint";
  for (const auto* layer : net.layers()) {
    os << " " << layer->name << ":" << layer->out_ch << "x" << layer->in_ch << "x"
       << layer->kernel << "x" << layer->kernel;
  }
  return os.str();
}

void save_checkpoint(const std::filesystem::path& path, const Network& net) {
  auto os = open_out(path);
  os << checkpoint_manifest(net) << "\n";
  for (const auto* layer : net.layers()) {
    const Shape4 wshape{layer->out_ch, layer->in_ch, layer->kernel, layer->kernel};
    write_tensor(os, Tensor4(wshape, Eigen::Map<const Eigen::VectorXd>(layer->weights.data(),
                                                                      layer->weights.size())));
    write_tensor(os, Tensor4(Shape4{1, layer->out_ch, 1, 1}, layer->bias));
  }
}

void load_checkpoint(const std::filesystem::path& path, Network& net) {
  auto is = open_in(path);
  std::string manifest;
  std::getline(is, manifest);
  if (manifest != checkpoint_manifest(net)) {
    throw IoError("checkpoint manifest does not match network: '" + manifest + "'");
  }
  for (auto* layer : net.layers()) {
    const Tensor4 w = read_tensor(is);
    const Tensor4 b = read_tensor(is);
    if (w.shape() != Shape4{layer->out_ch, layer->in_ch, layer->kernel, layer->kernel} ||
        b.shape() != Shape4{1, layer->out_ch, 1, 1}) {
      throw IoError("checkpoint tensor shape mismatch for layer " + layer->name);
    }
    Eigen::Map<Eigen::VectorXd>(layer->weights.data(), layer->weights.size()) = w.data();
    layer->bias = b.data();
  }
}

}  // namespace lau
