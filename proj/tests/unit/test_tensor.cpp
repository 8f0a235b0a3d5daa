#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "lau/rng.hpp"
#include "lau/tensor.hpp"

namespace lau {
namespace {

TEST(NchwIndex, HandComputedOffsets) {
  const Shape4 s{2, 3, 5, 6};
  EXPECT_EQ(nchw_index(0, 0, 0, 0, s), 0u);
  EXPECT_EQ(nchw_index(1, 2, 3, 4, s), 172u);
  EXPECT_EQ(nchw_index(1, 2, 4, 5, s), 179u);
}

TEST(NchwIndex, IsABijection) {
  const Shape4 s{2, 3, 4, 5};
  std::set<std::size_t> seen;
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) seen.insert(nchw_index(n, c, y, x, s));
  EXPECT_EQ(seen.size(), s.size());
  EXPECT_EQ(*seen.rbegin(), s.size() - 1);
}

TEST(NchwIndex, OutOfRangeThrows) {
  const Shape4 s{1, 2, 3, 4};
  EXPECT_THROW(nchw_index(1, 0, 0, 0, s), IndexError);
  EXPECT_THROW(nchw_index(0, 0, 0, -1, s), IndexError);
  EXPECT_THROW(nchw_index(0, 0, 3, 0, s), IndexError);
}

TEST(Tensor4, ConstructionAndAccess) {
  Tensor4 t(1, 2, 3, 4, 1.5);
  EXPECT_EQ(t.size(), 24u);
  EXPECT_DOUBLE_EQ(t(0, 1, 2, 3), 1.5);
  t(0, 1, 2, 3) = -2.0;
  EXPECT_DOUBLE_EQ(t.at(0, 1, 2, 3), -2.0);
  EXPECT_DOUBLE_EQ(t.data()[23], -2.0);
  EXPECT_DOUBLE_EQ(t.plane(0, 1)(2, 3), -2.0);
  EXPECT_THROW(t.at(0, 2, 0, 0), IndexError);
  EXPECT_THROW(Tensor4(Shape4{1, 1, 2, 2}, Eigen::VectorXd::Zero(3)), ShapeError);
}

TEST(Tensor4, ArgmaxTiesGoToLowestChannel) {
  Tensor4 t(1, 3, 1, 2);
  t(0, 0, 0, 0) = 1.0;
  t(0, 1, 0, 0) = 1.0;
  t(0, 2, 0, 0) = 0.5;
  t(0, 2, 0, 1) = 3.0;
  const LabelMap m = argmax_labels(t);
  EXPECT_EQ(m(0, 0, 0), 0);
  EXPECT_EQ(m(0, 0, 1), 2);
}

TEST(LabelMap, ValidateRejectsOutOfRangeLabels) {
  LabelMap m(1, 2, 2, 3);
  m(0, 1, 1) = -1;  // ignore is fine
  EXPECT_NO_THROW(m.validate());
  m(0, 0, 0) = 3;
  EXPECT_THROW(m.validate(), ShapeError);
}

// Reference SplitMix64 written from the published constants.
std::uint64_t splitmix_reference(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

TEST(Rng, SeedZeroFirstOutput) {
  Rng rng(0);
  EXPECT_EQ(rng.next_u64(), 0xE220A8397B1DCDAFULL);
}

TEST(Rng, MatchesReferenceStream) {
  Rng rng(12345);
  std::uint64_t state = 12345;
  for (int i = 0; i < 100; ++i) EXPECT_EQ(rng.next_u64(), splitmix_reference(state));
}

TEST(Rng, UniformUsesHigh53Bits) {
  Rng a(7);
  Rng b(7);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    EXPECT_EQ(u, static_cast<double>(b.next_u64() >> 11) * 0x1.0p-53);
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(Rng, Deterministic) {
  Rng a(99);
  Rng b(99);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(a.uniform(), b.uniform());
}

TEST(Rng, NormalProperties) {
  Rng a(3);
  EXPECT_EQ(a.normal(2.5, 0.0), 2.5);
  Rng b(5);
  Rng c(5);
  for (int i = 0; i < 100; ++i) {
    EXPECT_NEAR(b.normal(3.0, 2.0), 3.0 + 2.0 * c.normal(0.0, 1.0), 1e-12);
  }
  Rng d(0);
  double sum = 0.0;
  double sq = 0.0;
  const int count = 100000;
  for (int i = 0; i < count; ++i) {
    const double v = d.normal();
    ASSERT_TRUE(std::isfinite(v));
    sum += v;
    sq += v * v;
  }
  EXPECT_NEAR(sum / count, 0.0, 0.02);
  EXPECT_NEAR(sq / count, 1.0, 0.02);
}

TEST(Rng, UniformIntInclusiveRange) {
  Rng rng(11);
  std::set<int> seen;
  for (int i = 0; i < 2000; ++i) {
    const int v = rng.uniform_int(-2, 2);
    ASSERT_GE(v, -2);
    ASSERT_LE(v, 2);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 5u);
}

TEST(Rng, MixSeedSeparatesStreams) {
  EXPECT_NE(mix_seed(1, 0), mix_seed(1, 1));
  EXPECT_NE(mix_seed(0, 1), mix_seed(1, 0));
  EXPECT_EQ(mix_seed(4, 9), mix_seed(4, 9));
}

}  // namespace
}  // namespace lau
