#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "lau/rng.hpp"
#include "lau/samplers.hpp"

namespace lau {
namespace {

Tensor4 random_tensor(const Shape4& s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor4 t(s);
  for (Eigen::Index i = 0; i < t.data().size(); ++i) t.data()[i] = rng.uniform(lo, hi);
  return t;
}

double tent(double d) { return std::max(0.0, 1.0 - std::abs(d)); }

// Brute-force kernel sum: every source pixel weighted by the product of tent
// kernels at the clamped source point.
Tensor4 kernel_sum_oracle(const Tensor4& u, const OffsetField* off, int k) {
  Tensor4 v(u.n(), u.c(), u.h() * k, u.w() * k);
  for (int n = 0; n < u.n(); ++n)
    for (int c = 0; c < u.c(); ++c)
      for (int y = 0; y < v.h(); ++y)
        for (int x = 0; x < v.w(); ++x) {
          double px = static_cast<double>(x) / k;
          double py = static_cast<double>(y) / k;
          if (off != nullptr) {
            const int g = off->groups() == 1 ? 0 : c;
            px += off->dx(n, g, y, x);
            py += off->dy(n, g, y, x);
          }
          px = std::clamp(px, 0.0, u.w() - 1.0);
          py = std::clamp(py, 0.0, u.h() - 1.0);
          double acc = 0.0;
          for (int jy = 0; jy < u.h(); ++jy)
            for (int jx = 0; jx < u.w(); ++jx) acc += tent(px - jx) * tent(py - jy) * u(n, c, jy, jx);
          v(n, c, y, x) = acc;
        }
  return v;
}

double max_abs_diff(const Tensor4& a, const Tensor4& b) {
  EXPECT_EQ(a.shape(), b.shape());
  return (a.data() - b.data()).cwiseAbs().maxCoeff();
}

TEST(Bilinear, HandExample) {
  Tensor4 u(1, 1, 2, 2);
  u(0, 0, 0, 0) = 0;
  u(0, 0, 0, 1) = 1;
  u(0, 0, 1, 0) = 2;
  u(0, 0, 1, 1) = 3;
  const Tensor4 v = bilinear_upsample(u, 2);
  EXPECT_EQ(v.shape(), (Shape4{1, 1, 4, 4}));
  EXPECT_DOUBLE_EQ(v(0, 0, 1, 1), 1.5);
  EXPECT_DOUBLE_EQ(v(0, 0, 0, 1), 0.5);
  EXPECT_DOUBLE_EQ(v(0, 0, 3, 3), 3.0);  // clamped past the last source pixel
  EXPECT_LE(max_abs_diff(v, kernel_sum_oracle(u, nullptr, 2)), 1e-15);
}

TEST(Bilinear, MatchesKernelSumOracle) {
  Rng rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    const Shape4 s{rng.uniform_int(1, 2), rng.uniform_int(1, 3), rng.uniform_int(1, 5),
                   rng.uniform_int(1, 5)};
    const int k = rng.uniform_int(1, 4);
    const Tensor4 u = random_tensor(s, rng);
    EXPECT_LE(max_abs_diff(bilinear_upsample(u, k), kernel_sum_oracle(u, nullptr, k)), 1e-12);
  }
}

TEST(Bilinear, ConstantFieldAndIdentity) {
  const Tensor4 u(2, 2, 3, 4, 5.0);
  for (int k : {1, 2, 3, 5}) {
    const Tensor4 v = bilinear_upsample(u, k);
    EXPECT_LE((v.data().array() - 5.0).abs().maxCoeff(), 1e-12);
  }
  Rng rng(2);
  const Tensor4 r = random_tensor({1, 2, 3, 3}, rng);
  EXPECT_EQ(bilinear_upsample(r, 1).data(), r.data());
}

TEST(Bilinear, BackwardIsAdjoint) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Shape4 s{1, 2, rng.uniform_int(1, 4), rng.uniform_int(1, 4)};
    const int k = rng.uniform_int(1, 3);
    const Tensor4 u = random_tensor(s, rng);
    const Tensor4 g = random_tensor({1, 2, s.h * k, s.w * k}, rng);
    const double lhs = bilinear_upsample(u, k).data().dot(g.data());
    const double rhs = u.data().dot(bilinear_upsample_backward(g, s, k).data());
    EXPECT_NEAR(lhs, rhs, 1e-12);
  }
}

TEST(Lau, ZeroOffsetsAreExactlyBilinear) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = std::array{1, 2, 4, 8}[static_cast<std::size_t>(trial % 4)];
    const Shape4 s{rng.uniform_int(1, 2), rng.uniform_int(1, 3), rng.uniform_int(1, 5),
                   rng.uniform_int(1, 5)};
    const Tensor4 u = random_tensor(s, rng);
    const int groups = trial % 2 == 0 ? 1 : s.c;
    const OffsetField zero(s.n, groups, s.h * k, s.w * k);
    EXPECT_EQ(lau_forward(u, zero, k).data(), bilinear_upsample(u, k).data());
  }
}

TEST(Lau, MatchesKernelSumOracle) {
  Rng rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const Shape4 s{rng.uniform_int(1, 2), rng.uniform_int(1, 3), rng.uniform_int(2, 4),
                   rng.uniform_int(2, 4)};
    const int k = rng.uniform_int(1, 3);
    const int groups = trial % 2 == 0 ? 1 : s.c;
    const Tensor4 u = random_tensor(s, rng);
    OffsetField off(random_tensor({s.n, groups, s.h * k, s.w * k}, rng, -1.5, 1.5),
                    random_tensor({s.n, groups, s.h * k, s.w * k}, rng, -1.5, 1.5));
    EXPECT_LE(max_abs_diff(lau_forward(u, off, k), kernel_sum_oracle(u, &off, k)), 1e-12);
  }
}

TEST(Lau, LatticePointReadsSourceExactly) {
  Rng rng(6);
  const Tensor4 u = random_tensor({1, 1, 3, 3}, rng);
  OffsetField off(1, 1, 6, 6);
  // Output (y=1, x=3) starts at (1.5, 0.5); shift it onto source (2, 1).
  off.dx(0, 0, 1, 3) = 0.5;
  off.dy(0, 0, 1, 3) = 0.5;
  EXPECT_EQ(lau_forward(u, off, 2)(0, 0, 1, 3), u(0, 0, 1, 2));
}

TEST(Lau, BackwardZeroAndLinearInGradOutput) {
  Rng rng(7);
  const Shape4 s{1, 2, 3, 3};
  const Tensor4 u = random_tensor(s, rng);
  OffsetField off(random_tensor({1, 1, 6, 6}, rng, -0.7, 0.7),
                  random_tensor({1, 1, 6, 6}, rng, -0.7, 0.7));
  const Tensor4 zero(1, 2, 6, 6);
  const LauGrads g0 = lau_backward(u, off, 2, zero);
  EXPECT_EQ(g0.input.data().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(g0.offsets.dx.data().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(g0.offsets.dy.data().cwiseAbs().maxCoeff(), 0.0);

  const Tensor4 a = random_tensor({1, 2, 6, 6}, rng);
  const Tensor4 b = random_tensor({1, 2, 6, 6}, rng);
  Tensor4 sum = a;
  sum.data() = 2.0 * a.data() - 3.0 * b.data();
  const LauGrads ga = lau_backward(u, off, 2, a);
  const LauGrads gb = lau_backward(u, off, 2, b);
  const LauGrads gs = lau_backward(u, off, 2, sum);
  EXPECT_LE((gs.input.data() - (2.0 * ga.input.data() - 3.0 * gb.input.data())).cwiseAbs().maxCoeff(),
            1e-12);
  EXPECT_LE((gs.offsets.dx.data() - (2.0 * ga.offsets.dx.data() - 3.0 * gb.offsets.dx.data()))
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
}

TEST(Lau, InputGradientIsAdjointOfForward) {
  Rng rng(8);
  const Shape4 s{2, 2, 3, 4};
  const Tensor4 u = random_tensor(s, rng);
  OffsetField off(random_tensor({2, 2, 9, 12}, rng, -1.0, 1.0),
                  random_tensor({2, 2, 9, 12}, rng, -1.0, 1.0));
  const Tensor4 g = random_tensor({2, 2, 9, 12}, rng);
  const double lhs = lau_forward(u, off, 3).data().dot(g.data());
  const double rhs = u.data().dot(lau_backward(u, off, 3, g).input.data());
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(Lau, OffsetGradientSignAndClampedZero) {
  // Single row [0, 10]; the output at x = 0 samples p = dx.
  Tensor4 u(1, 1, 1, 2);
  u(0, 0, 0, 1) = 10.0;
  OffsetField off(1, 1, 1, 2);
  off.dx(0, 0, 0, 0) = 0.25;
  Tensor4 g(1, 1, 1, 2);
  g(0, 0, 0, 0) = 1.0;
  // V = 10 p, so dV/dp = +10: source x_j = 1 lies above p and contributes +U_j.
  EXPECT_DOUBLE_EQ(lau_backward(u, off, 1, g).offsets.dx(0, 0, 0, 0), 10.0);
  // Pushed at least one pixel past the grid: clamped, zero gradient.
  off.dx(0, 0, 0, 0) = 2.5;
  EXPECT_DOUBLE_EQ(lau_backward(u, off, 1, g).offsets.dx(0, 0, 0, 0), 0.0);
  off.dx(0, 0, 0, 0) = -1.5;
  EXPECT_DOUBLE_EQ(lau_backward(u, off, 1, g).offsets.dx(0, 0, 0, 0), 0.0);
}

TEST(Lau, ThreadCountDoesNotChangeResults) {
  Rng rng(9);
  const Tensor4 u = random_tensor({2, 3, 4, 4}, rng);
  OffsetField off(random_tensor({2, 3, 8, 8}, rng), random_tensor({2, 3, 8, 8}, rng));
  const Tensor4 g = random_tensor({2, 3, 8, 8}, rng);
  unsetenv("LAU_THREADS");
  const Tensor4 v1 = lau_forward(u, off, 2);
  const LauGrads g1 = lau_backward(u, off, 2, g);
  setenv("LAU_THREADS", "4", 1);
  const Tensor4 v4 = lau_forward(u, off, 2);
  const LauGrads g4 = lau_backward(u, off, 2, g);
  unsetenv("LAU_THREADS");
  EXPECT_EQ(v1.data(), v4.data());
  EXPECT_EQ(g1.input.data(), g4.input.data());
  EXPECT_EQ(g1.offsets.dx.data(), g4.offsets.dx.data());
  EXPECT_EQ(g1.offsets.dy.data(), g4.offsets.dy.data());
}

TEST(Lau, RejectsMismatchedOffsets) {
  const Tensor4 u(1, 2, 3, 3);
  EXPECT_THROW(lau_forward(u, OffsetField(1, 1, 5, 6), 2), ShapeError);
  EXPECT_THROW(lau_forward(u, OffsetField(1, 3, 6, 6), 2), ShapeError);
}

TEST(OffsetField, InterleavedRoundTrip) {
  Rng rng(10);
  const Tensor4 packed = random_tensor({2, 4, 3, 3}, rng);
  const OffsetField off = OffsetField::from_interleaved(packed);
  EXPECT_EQ(off.groups(), 2);
  EXPECT_EQ(off.dx(1, 1, 2, 0), packed(1, 2, 2, 0));
  EXPECT_EQ(off.dy(1, 1, 2, 0), packed(1, 3, 2, 0));
  EXPECT_EQ(off.to_interleaved().data(), packed.data());
  EXPECT_THROW(OffsetField::from_interleaved(Tensor4(1, 3, 2, 2)), ShapeError);
}

// Kronecker-delta kernel enumeration over every (input, output) pair.
Tensor4 shuffle_oracle(const Tensor4& u, int k) {
  Tensor4 v(u.n(), u.c() / (k * k), u.h() * k, u.w() * k);
  for (int n = 0; n < u.n(); ++n)
    for (int g = 0; g < v.c(); ++g)
      for (int y = 0; y < v.h(); ++y)
        for (int x = 0; x < v.w(); ++x) {
          double acc = 0.0;
          for (int c = 0; c < u.c(); ++c)
            for (int i = 0; i < u.h(); ++i)
              for (int j = 0; j < u.w(); ++j) {
                const bool hit = c == g * k * k + k * (y % k) + (x % k) && i == y / k && j == x / k;
                acc += hit ? u(n, c, i, j) : 0.0;
              }
          v(n, g, y, x) = acc;
        }
  return v;
}

TEST(PixelShuffle, BlockExample) {
  Tensor4 u(1, 4, 1, 1);
  for (int c = 0; c < 4; ++c) u(0, c, 0, 0) = 10.0 + c;
  const Tensor4 v = pixel_shuffle(u, 2);
  EXPECT_EQ(v(0, 0, 0, 0), 10.0);
  EXPECT_EQ(v(0, 0, 0, 1), 11.0);
  EXPECT_EQ(v(0, 0, 1, 0), 12.0);
  EXPECT_EQ(v(0, 0, 1, 1), 13.0);
}

TEST(PixelShuffle, MatchesDeltaKernelEnumeration) {
  Rng rng(11);
  for (int k = 1; k <= 3; ++k)
    for (int n = 1; n <= 2; ++n)
      for (int groups = 1; groups * k * k <= 18; ++groups)
        for (int h = 1; h <= 3; ++h)
          for (int w = 1; w <= 3; ++w) {
            const Tensor4 u = random_tensor({n, groups * k * k, h, w}, rng);
            const Tensor4 v = pixel_shuffle(u, k);
            ASSERT_EQ(v.data(), shuffle_oracle(u, k).data());
            ASSERT_EQ(pixel_unshuffle(v, k).data(), u.data());
          }
}

TEST(PixelShuffle, UnshuffleThenShuffle) {
  Rng rng(12);
  const Tensor4 v = random_tensor({2, 3, 6, 9}, rng);
  EXPECT_EQ(pixel_shuffle(pixel_unshuffle(v, 3), 3).data(), v.data());
  EXPECT_EQ(pixel_shuffle(v, 1).data(), v.data());
  EXPECT_THROW(pixel_shuffle(v, 2), ShapeError);
  EXPECT_THROW(pixel_unshuffle(v, 2), ShapeError);
}

// Indicator kernel: exactly one source pixel per axis.
Tensor4 corner_oracle(const Tensor4& u, int k, const Corner& corner) {
  Tensor4 v(u.n(), u.c(), u.h() * k, u.w() * k);
  auto pick = [k](int out, Rounding mode, int extent) {
    const double p = static_cast<double>(out) / k;
    const double r = mode == Rounding::kFloor ? std::floor(p) : std::ceil(p);
    return static_cast<int>(std::clamp(r, 0.0, extent - 1.0));
  };
  for (int n = 0; n < u.n(); ++n)
    for (int c = 0; c < u.c(); ++c)
      for (int y = 0; y < v.h(); ++y)
        for (int x = 0; x < v.w(); ++x) {
          const int jx = pick(x, corner.x, u.w());
          const int jy = pick(y, corner.y, u.h());
          double acc = 0.0;
          for (int i = 0; i < u.h(); ++i)
            for (int j = 0; j < u.w(); ++j) acc += (i == jy && j == jx) ? u(n, c, i, j) : 0.0;
          v(n, c, y, x) = acc;
        }
  return v;
}

TEST(Corner, FloorFloorExample) {
  Tensor4 u(1, 1, 2, 2);
  u(0, 0, 0, 1) = 1;
  u(0, 0, 1, 0) = 2;
  u(0, 0, 1, 1) = 3;
  const Tensor4 v = corner_upsample(u, 2, parse_corner("ff"));
  const double expected[4][4] = {{0, 0, 1, 1}, {0, 0, 1, 1}, {2, 2, 3, 3}, {2, 2, 3, 3}};
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) EXPECT_EQ(v(0, 0, y, x), expected[y][x]);
}

TEST(Corner, MatchesIndicatorOracleWithClipping) {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const Shape4 s{rng.uniform_int(1, 2), rng.uniform_int(1, 2), rng.uniform_int(1, 4),
                   rng.uniform_int(1, 4)};
    const int k = rng.uniform_int(1, 4);
    const Tensor4 u = random_tensor(s, rng);
    for (const Corner& c : kCandidateCorners) {
      ASSERT_EQ(corner_upsample(u, k, c).data(), corner_oracle(u, k, c).data())
          << corner_name(c) << " k=" << k;
    }
  }
}

TEST(Corner, AgreeOnLatticeAndIdentityAtK1) {
  Rng rng(14);
  const Tensor4 u = random_tensor({1, 2, 3, 3}, rng);
  for (const Corner& c : kCandidateCorners) {
    EXPECT_EQ(corner_upsample(u, 1, c).data(), u.data());
    const Tensor4 v = corner_upsample(u, 3, c);
    for (int y = 0; y < 9; y += 3)
      for (int x = 0; x < 9; x += 3) EXPECT_EQ(v(0, 1, y, x), u(0, 1, y / 3, x / 3));
  }
}

TEST(Corner, NamesRoundTrip) {
  for (const Corner& c : kCandidateCorners) EXPECT_EQ(parse_corner(corner_name(c)), c);
  EXPECT_EQ(corner_name(kCandidateCorners[1]), "cf");
  EXPECT_THROW(parse_corner("xx"), ConfigError);
}

}  // namespace
}  // namespace lau
