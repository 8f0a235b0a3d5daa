#pragma once

#include <array>
#include <string>

#include "lau/tensor.hpp"

namespace lau {

/// Per-output-pixel sampling displacements, in input-grid units.
///
/// `dx` and `dy` are laid out like a Tensor4 of shape (n, m, h_out, w_out):
/// group g of m shifts channel g of the input when m equals the channel count,
/// and every channel when m == 1.
struct OffsetField {
  Tensor4 dx;
  Tensor4 dy;

  OffsetField() = default;
  OffsetField(int n, int m, int h_out, int w_out)
      : dx(n, m, h_out, w_out), dy(n, m, h_out, w_out) {}
  OffsetField(Tensor4 dx_, Tensor4 dy_);

  int n() const { return dx.n(); }
  int groups() const { return dx.c(); }
  int h() const { return dx.h(); }
  int w() const { return dx.w(); }

  /// Splits a (n, 2m, H, W) tensor whose channels are interleaved
  /// (dx_0, dy_0, dx_1, dy_1, ...).
  static OffsetField from_interleaved(const Tensor4& packed);
  Tensor4 to_interleaved() const;
};

enum class Rounding { kFloor, kCeil };

/// Integral-coordinate sampler selecting floor or ceil of the source point on
/// each axis.
struct Corner {
  Rounding x = Rounding::kFloor;
  Rounding y = Rounding::kFloor;

  friend bool operator==(const Corner&, const Corner&) = default;
};

// Auxiliary candidate order used by the regression loss: (floor, floor),
// (ceil, floor), (floor, ceil), (ceil, ceil) as (x, y).
inline constexpr std::array<Corner, 4> kCandidateCorners = {
    Corner{Rounding::kFloor, Rounding::kFloor},
    Corner{Rounding::kCeil, Rounding::kFloor},
    Corner{Rounding::kFloor, Rounding::kCeil},
    Corner{Rounding::kCeil, Rounding::kCeil},
};

/// "ff", "cf", "fc" or "cc" (x mode first).
std::string corner_name(const Corner& corner);
Corner parse_corner(const std::string& name);

/// Bilinear upsampling by integer ratio k; output pixel (y, x) samples the
/// source point (x / k, y / k) clamped into the input grid.
Tensor4 bilinear_upsample(const Tensor4& input, int k);

/// Adjoint of bilinear_upsample: scatters dV back onto the input grid.
Tensor4 bilinear_upsample_backward(const Tensor4& grad_output, const Shape4& input_shape,
                                   int k);

/// Location-aware upsampling: bilinear sampling at (x / k + dx, y / k + dy).
/// With an all-zero offset field the result is bit-identical to
/// bilinear_upsample.
Tensor4 lau_forward(const Tensor4& input, const OffsetField& offsets, int k);

struct LauGrads {
  Tensor4 input;
  OffsetField offsets;
};

/// Gradients of lau_forward w.r.t. the input and the offsets.
///
/// The offset derivative uses the sign of (x_j - p) within the unit support of
/// the tent kernel and 0 at exact lattice points; an axis whose raw source
/// coordinate was clamped receives a zero offset gradient. Accumulation order
/// is fixed, so results do not depend on the thread count.
LauGrads lau_backward(const Tensor4& input, const OffsetField& offsets, int k,
                      const Tensor4& grad_output);

/// Periodic shuffle: (n, c, h, w) -> (n, c / k^2, k h, k w) with
/// V[g, y, x] = U[g k^2 + k (y mod k) + (x mod k), y / k, x / k].
Tensor4 pixel_shuffle(const Tensor4& input, int k);
/// Exact inverse of pixel_shuffle.
Tensor4 pixel_unshuffle(const Tensor4& input, int k);

/// Nearest integral source pixel chosen by per-axis floor/ceil of (x / k, y / k),
/// clipped into the grid.
Tensor4 corner_upsample(const Tensor4& input, int k, const Corner& corner);

/// Source column (or row) used by corner_upsample for output coordinate `out`.
int corner_source_index(int out, int k, Rounding mode, int extent);

}  // namespace lau
