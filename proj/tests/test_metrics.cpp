#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "oracles.hpp"
#include "tempocc/metrics.hpp"

using namespace tempocc;
using namespace tempocc::oracle;

namespace {

Partition relabel(const Partition& p, std::mt19937_64& rng) {
  std::vector<int> ids(p.begin(), p.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  auto shuffled = ids;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  std::map<int, int> m;
  for (std::size_t i = 0; i < ids.size(); ++i) m[ids[i]] = shuffled[i] + 100;
  Partition out;
  for (int v : p) out.push_back(m[v]);
  return out;
}

}  // namespace

TEST(Nmi, IdenticalPartitions) {
  EXPECT_DOUBLE_EQ(nmi({0, 0, 1, 1, 2}, {5, 5, 3, 3, 9}), 1.0);
}

TEST(Nmi, SingleClusterAgainstTwo) { EXPECT_EQ(nmi({0, 0, 0, 0}, {0, 0, 1, 1}), 0.0); }

TEST(Nmi, IndependentPartitions) { EXPECT_NEAR(nmi({0, 0, 1, 1}, {0, 1, 0, 1}), 0.0, 1e-15); }

TEST(RandIndex, PermutedLabels) { EXPECT_EQ(rand_index({0, 0, 1, 2}, {2, 2, 0, 1}), 1.0); }

TEST(RandIndex, HandExampleIsExactlyOneThird) { EXPECT_EQ(rand_index({0, 0, 1, 1}, {0, 1, 0, 1}), 1.0 / 3.0); }

TEST(RandIndex, SingletonsAgainstOneCluster) { EXPECT_EQ(rand_index({0, 1, 2, 3}, {0, 0, 0, 0}), 0.0); }

TEST(Metrics, ErrorsOnBadInput) {
  EXPECT_THROW(nmi({0, 1}, {0}), DimensionError);
  EXPECT_THROW(rand_index({0}, {0}), DimensionError);
  EXPECT_THROW(nmi({}, {}), DimensionError);
}

TEST(Metrics, MatchBruteForceOnRandomPartitions) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 7;
    auto a = random_partition(n, rng), b = random_partition(n, rng);
    EXPECT_NEAR(nmi(a, b), brute_nmi(a, b), 1e-12);
    EXPECT_NEAR(rand_index(a, b), brute_rand_index(a, b), 1e-12);
  }
}

TEST(Metrics, SymmetricAndRelabelInvariant) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 30;
    auto a = random_partition(n, rng), b = random_partition(n, rng);
    EXPECT_NEAR(nmi(a, b), nmi(b, a), 1e-12);
    EXPECT_EQ(rand_index(a, b), rand_index(b, a));
    EXPECT_NEAR(nmi(relabel(a, rng), relabel(b, rng)), nmi(a, b), 1e-12);
    EXPECT_EQ(rand_index(relabel(a, rng), b), rand_index(a, b));
    const double v = nmi(a, b);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}
