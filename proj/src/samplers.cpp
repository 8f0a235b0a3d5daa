#include "lau/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "lau/parallel.hpp"

namespace lau {

namespace {

// Tent-kernel support of one source coordinate along one axis.
struct AxisSample {
  int lo = 0;
  int hi = 0;
  double frac = 0.0;  // weight of `hi`; `lo` gets 1 - frac
  bool clamped = false;
};

AxisSample locate(double p, int extent) {
  AxisSample s;
  const double upper = static_cast<double>(extent - 1);
  s.clamped = p < 0.0 || p > upper;
  const double c = std::clamp(p, 0.0, upper);
  s.lo = std::min(static_cast<int>(std::floor(c)), extent - 1);
  s.frac = c - s.lo;
  s.hi = std::min(s.lo + 1, extent - 1);
  return s;
}

void check_ratio(int k) {
  if (k < 1) throw ShapeError("upsampling ratio must be >= 1, got " + std::to_string(k));
}

Shape4 upsampled_shape(const Shape4& in, int k) {
  return Shape4{in.n, in.c, in.h * k, in.w * k};
}

void check_offsets(const Shape4& in, const OffsetField& off, int k) {
  if (off.dx.shape() != off.dy.shape()) {
    throw ShapeError("offset field dx/dy shapes differ");
  }
  if (off.n() != in.n || off.h() != in.h * k || off.w() != in.w * k) {
    throw ShapeError("offset field " + to_string(off.dx.shape()) +
                     " does not match upsampled resolution of " + to_string(in) +
                     " at ratio " + std::to_string(k));
  }
  if (off.groups() != 1 && off.groups() != in.c) {
    throw ShapeError("offset groups must be 1 or the channel count");
  }
}

// Shared forward kernel; `off` is null for plain bilinear sampling.
Tensor4 sample_forward(const Tensor4& input, const OffsetField* off, int k) {
  const Shape4 in = input.shape();
  Tensor4 out(upsampled_shape(in, k));
  const int H = in.h * k;
  const int W = in.w * k;
  parallel_for(static_cast<std::size_t>(in.n) * in.c, [&](std::size_t idx) {
    const int n = static_cast<int>(idx / in.c);
    const int c = static_cast<int>(idx % in.c);
    const int g = (off == nullptr || off->groups() == 1) ? 0 : c;
    auto src = input.plane(n, c);
    auto dst = out.plane(n, c);
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        double px = static_cast<double>(x) / k;
        double py = static_cast<double>(y) / k;
        if (off != nullptr) {
          px += off->dx(n, g, y, x);
          py += off->dy(n, g, y, x);
        }
        const AxisSample sx = locate(px, in.w);
        const AxisSample sy = locate(py, in.h);
        const double top = (1.0 - sx.frac) * src(sy.lo, sx.lo) + sx.frac * src(sy.lo, sx.hi);
        const double bottom =
            (1.0 - sx.frac) * src(sy.hi, sx.lo) + sx.frac * src(sy.hi, sx.hi);
        dst(y, x) = (1.0 - sy.frac) * top + sy.frac * bottom;
      }
    }
  });
  return out;
}

}  // namespace

OffsetField::OffsetField(Tensor4 dx_, Tensor4 dy_) : dx(std::move(dx_)), dy(std::move(dy_)) {
  if (dx.shape() != dy.shape()) throw ShapeError("offset field dx/dy shapes differ");
}

OffsetField OffsetField::from_interleaved(const Tensor4& packed) {
  const auto& s = packed.shape();
  if (s.c % 2 != 0) throw ShapeError("interleaved offsets need an even channel count");
  OffsetField off(s.n, s.c / 2, s.h, s.w);
  for (int n = 0; n < s.n; ++n) {
    for (int g = 0; g < s.c / 2; ++g) {
      off.dx.plane(n, g) = packed.plane(n, 2 * g);
      off.dy.plane(n, g) = packed.plane(n, 2 * g + 1);
    }
  }
  return off;
}

Tensor4 OffsetField::to_interleaved() const {
  Tensor4 packed(n(), 2 * groups(), h(), w());
  for (int n_i = 0; n_i < n(); ++n_i) {
    for (int g = 0; g < groups(); ++g) {
      packed.plane(n_i, 2 * g) = dx.plane(n_i, g);
      packed.plane(n_i, 2 * g + 1) = dy.plane(n_i, g);
    }
  }
  return packed;
}

std::string corner_name(const Corner& corner) {
  std::string name;
  name += corner.x == Rounding::kFloor ? 'f' : 'c';
  name += corner.y == Rounding::kFloor ? 'f' : 'c';
  return name;
}

Corner parse_corner(const std::string& name) {
  if (name.size() != 2) throw ConfigError("corner must be one of ff, cf, fc, cc");
  auto mode = [&](char ch) {
    if (ch == 'f') return Rounding::kFloor;
    if (ch == 'c') return Rounding::kCeil;
    throw ConfigError("corner must be one of ff, cf, fc, cc");
  };
  return Corner{mode(name[0]), mode(name[1])};
}

Tensor4 bilinear_upsample(const Tensor4& input, int k) {
  check_ratio(k);
  return sample_forward(input, nullptr, k);
}

Tensor4 bilinear_upsample_backward(const Tensor4& grad_output, const Shape4& input_shape,
                                   int k) {
  check_ratio(k);
  if (grad_output.shape() != upsampled_shape(input_shape, k)) {
    throw ShapeError("bilinear backward: gradient shape " + to_string(grad_output.shape()) +
                     " does not match " + to_string(upsampled_shape(input_shape, k)));
  }
  Tensor4 grad_input(input_shape);
  const int H = input_shape.h * k;
  const int W = input_shape.w * k;
  parallel_for(static_cast<std::size_t>(input_shape.n) * input_shape.c, [&](std::size_t idx) {
    const int n = static_cast<int>(idx / input_shape.c);
    const int c = static_cast<int>(idx % input_shape.c);
    auto dv = grad_output.plane(n, c);
    auto du = grad_input.plane(n, c);
    for (int y = 0; y < H; ++y) {
      const AxisSample sy = locate(static_cast<double>(y) / k, input_shape.h);
      for (int x = 0; x < W; ++x) {
        const AxisSample sx = locate(static_cast<double>(x) / k, input_shape.w);
        const double g = dv(y, x);
        du(sy.lo, sx.lo) += (1.0 - sy.frac) * (1.0 - sx.frac) * g;
        du(sy.lo, sx.hi) += (1.0 - sy.frac) * sx.frac * g;
        du(sy.hi, sx.lo) += sy.frac * (1.0 - sx.frac) * g;
        du(sy.hi, sx.hi) += sy.frac * sx.frac * g;
      }
    }
  });
  return grad_input;
}

Tensor4 lau_forward(const Tensor4& input, const OffsetField& offsets, int k) {
  check_ratio(k);
  check_offsets(input.shape(), offsets, k);
  return sample_forward(input, &offsets, k);
}

LauGrads lau_backward(const Tensor4& input, const OffsetField& offsets, int k,
                      const Tensor4& grad_output) {
  check_ratio(k);
  const Shape4 in = input.shape();
  check_offsets(in, offsets, k);
  if (grad_output.shape() != upsampled_shape(in, k)) {
    throw ShapeError("lau backward: gradient shape " + to_string(grad_output.shape()) +
                     " does not match " + to_string(upsampled_shape(in, k)));
  }
  const int groups = offsets.groups();
  LauGrads grads{Tensor4(in), OffsetField(in.n, groups, in.h * k, in.w * k)};
  const int H = in.h * k;
  const int W = in.w * k;

  parallel_for(static_cast<std::size_t>(in.n) * groups, [&](std::size_t idx) {
    const int n = static_cast<int>(idx / groups);
    const int g = static_cast<int>(idx % groups);
    const int c_begin = groups == 1 ? 0 : g;
    const int c_end = groups == 1 ? in.c : g + 1;
    auto ddx = grads.offsets.dx.plane(n, g);
    auto ddy = grads.offsets.dy.plane(n, g);
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        const double px = static_cast<double>(x) / k + offsets.dx(n, g, y, x);
        const double py = static_cast<double>(y) / k + offsets.dy(n, g, y, x);
        const AxisSample sx = locate(px, in.w);
        const AxisSample sy = locate(py, in.h);
        // The derivative of the tent weight is +1 towards `hi` and -1 towards
        // `lo` only when p lies strictly between them.
        const bool x_moves = !sx.clamped && sx.frac > 0.0;
        const bool y_moves = !sy.clamped && sy.frac > 0.0;
        double acc_x = 0.0;
        double acc_y = 0.0;
        for (int c = c_begin; c < c_end; ++c) {
          const double dv = grad_output(n, c, y, x);
          auto src = input.plane(n, c);
          auto du = grads.input.plane(n, c);
          du(sy.lo, sx.lo) += (1.0 - sy.frac) * (1.0 - sx.frac) * dv;
          du(sy.lo, sx.hi) += (1.0 - sy.frac) * sx.frac * dv;
          du(sy.hi, sx.lo) += sy.frac * (1.0 - sx.frac) * dv;
          du(sy.hi, sx.hi) += sy.frac * sx.frac * dv;
          if (x_moves) {
            acc_x += dv * ((1.0 - sy.frac) * (src(sy.lo, sx.hi) - src(sy.lo, sx.lo)) +
                           sy.frac * (src(sy.hi, sx.hi) - src(sy.hi, sx.lo)));
          }
          if (y_moves) {
            acc_y += dv * ((1.0 - sx.frac) * (src(sy.hi, sx.lo) - src(sy.lo, sx.lo)) +
                           sx.frac * (src(sy.hi, sx.hi) - src(sy.lo, sx.hi)));
          }
        }
        ddx(y, x) = acc_x;
        ddy(y, x) = acc_y;
      }
    }
  });
  return grads;
}

Tensor4 pixel_shuffle(const Tensor4& input, int k) {
  check_ratio(k);
  const Shape4 in = input.shape();
  const int block = k * k;
  if (in.c % block != 0) {
    throw ShapeError("pixel_shuffle: channel count " + std::to_string(in.c) +
                     " not divisible by " + std::to_string(block));
  }
  Tensor4 out(in.n, in.c / block, in.h * k, in.w * k);
  for (int n = 0; n < in.n; ++n) {
    for (int g = 0; g < out.c(); ++g) {
      for (int y = 0; y < out.h(); ++y) {
        for (int x = 0; x < out.w(); ++x) {
          out(n, g, y, x) = input(n, g * block + k * (y % k) + (x % k), y / k, x / k);
        }
      }
    }
  }
  return out;
}

Tensor4 pixel_unshuffle(const Tensor4& input, int k) {
  check_ratio(k);
  const Shape4 in = input.shape();
  if (in.h % k != 0 || in.w % k != 0) {
    throw ShapeError("pixel_unshuffle: spatial dims " + to_string(in) +
                     " not divisible by " + std::to_string(k));
  }
  const int block = k * k;
  Tensor4 out(in.n, in.c * block, in.h / k, in.w / k);
  for (int n = 0; n < in.n; ++n) {
    for (int g = 0; g < in.c; ++g) {
      for (int y = 0; y < in.h; ++y) {
        for (int x = 0; x < in.w; ++x) {
          out(n, g * block + k * (y % k) + (x % k), y / k, x / k) = input(n, g, y, x);
        }
      }
    }
  }
  return out;
}

int corner_source_index(int out, int k, Rounding mode, int extent) {
  const int src = mode == Rounding::kFloor ? out / k : (out + k - 1) / k;
  return std::min(src, extent - 1);
}

Tensor4 corner_upsample(const Tensor4& input, int k, const Corner& corner) {
  check_ratio(k);
  const Shape4 in = input.shape();
  Tensor4 out(upsampled_shape(in, k));
  for (int n = 0; n < in.n; ++n) {
    for (int c = 0; c < in.c; ++c) {
      auto src = input.plane(n, c);
      auto dst = out.plane(n, c);
      for (int y = 0; y < out.h(); ++y) {
        const int sy = corner_source_index(y, k, corner.y, in.h);
        for (int x = 0; x < out.w(); ++x) {
          dst(y, x) = src(sy, corner_source_index(x, k, corner.x, in.w));
        }
      }
    }
  }
  return out;
}

}  // namespace lau
