#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "tempocc/augmentation.hpp"

using namespace tempocc;

namespace {

std::vector<double> ramp(std::size_t m) {
  std::vector<double> x(m);
  for (std::size_t t = 0; t < m; ++t) x[t] = std::sin(0.3 * static_cast<double>(t)) + 0.01 * static_cast<double>(t);
  return x;
}

AugmentationSpec only(AugmentKind kind) {
  AugmentationSpec s;
  s.family = {kind};
  return s;
}

}  // namespace

TEST(Augment, ZeroJitterIsIdentity) {
  auto x = ramp(64);
  AugmentationSpec s = only(AugmentKind::Jitter);
  s.jitter_sigma = 0.0;
  std::mt19937_64 rng(0);
  EXPECT_EQ(augment(x, s, rng), x);
}

TEST(Augment, UnitScaleIsIdentity) {
  auto x = ramp(64);
  EXPECT_EQ(augment_ops::scale(x, 1.0), x);
  AugmentationSpec s = only(AugmentKind::Scaling);
  s.scaling_sigma = 0.0;
  std::mt19937_64 rng(0);
  EXPECT_EQ(augment(x, s, rng), x);
}

TEST(Augment, JitterMeanAbsoluteDeviation) {
  auto x = ramp(64);
  AugmentationSpec s = only(AugmentKind::Jitter);
  std::mt19937_64 rng(1);
  double total = 0.0;
  for (int draw = 0; draw < 1000; ++draw) {
    auto y = augment(x, s, rng);
    for (std::size_t t = 0; t < x.size(); ++t) total += std::abs(y[t] - x[t]);
  }
  const double mad = total / (1000.0 * 64.0);
  EXPECT_GE(mad, 0.05);
  EXPECT_LE(mad, 0.15);
}

TEST(Augment, SegmentPermutePreservesMultiset) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 4 + rng() % 60;
    std::vector<double> x(m);
    for (auto& v : x) v = std::uniform_real_distribution<double>(-5, 5)(rng);
    AugmentationSpec s = only(AugmentKind::SegmentPermute);
    s.permute_parts = 2 + rng() % 6;
    auto y = augment(x, s, rng);
    auto xs = x, ys = y;
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    EXPECT_EQ(xs, ys);
  }
}

TEST(Augment, TimeShiftIsACircularRoll) {
  auto x = ramp(20);
  auto y = augment_ops::roll(x, 3);
  for (std::size_t t = 0; t < 20; ++t) EXPECT_EQ(y[(t + 3) % 20], x[t]);
  EXPECT_EQ(augment_ops::roll(augment_ops::roll(x, 7), -7), x);
}

TEST(Augment, ShapeAndDeterminismProperty) {
  std::mt19937_64 meta(3);
  const std::vector<AugmentKind> kinds = {AugmentKind::Jitter, AugmentKind::Scaling, AugmentKind::SegmentPermute,
                                          AugmentKind::TimeShift};
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 4 + meta() % 100;
    auto x = ramp(m);
    AugmentationSpec s;
    s.family.clear();
    for (auto k : kinds)
      if (meta() % 2) s.family.push_back(k);
    if (s.family.empty()) s.family.push_back(kinds[meta() % 4]);
    s.compose = meta() % 2;
    const auto seed = meta();
    std::mt19937_64 a(seed), b(seed);
    auto ya = augment(x, s, a), yb = augment(x, s, b);
    EXPECT_EQ(ya.size(), m);
    EXPECT_EQ(ya, yb);
    EXPECT_EQ(a, b);
  }
}

TEST(Augment, RowsKeepShape) {
  Array series = Array::matrix(5, 12, 1.0);
  std::mt19937_64 rng(4);
  EXPECT_EQ(augment_rows(series, AugmentationSpec{}, rng).shape(), series.shape());
}

TEST(Augment, InvalidSpecRejected) {
  AugmentationSpec s;
  s.family.clear();
  EXPECT_THROW(s.validate(), ConfigError);
  s = AugmentationSpec{};
  s.jitter_sigma = -1;
  EXPECT_THROW(s.validate(), ConfigError);
  s = AugmentationSpec{};
  s.permute_parts = 1;
  EXPECT_THROW(s.validate(), ConfigError);
  std::mt19937_64 rng(0);
  EXPECT_THROW(augment(std::vector<double>{1, 2, 3}, AugmentationSpec{}, rng), DimensionError);
  EXPECT_THROW(parse_augment_kind("warp"), ConfigError);
}
