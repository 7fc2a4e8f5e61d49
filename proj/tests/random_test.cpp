#include "driftlab/random.hpp"

#include <array>
#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

namespace driftlab {
namespace {

TEST(RngStream, SameIdentityGivesSameSequence) {
  RngStream a(42, 7);
  RngStream b(42, 7);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(RngStream, DistinctStreamsDiffer) {
  std::set<std::uint64_t> firsts;
  for (std::uint64_t id = 0; id < 100; ++id) firsts.insert(RngStream(42, id).next_u64());
  for (std::uint64_t seed = 0; seed < 100; ++seed) firsts.insert(RngStream(seed, 0).next_u64());
  EXPECT_EQ(firsts.size(), 199u);  // (42, 0) appears twice
}

TEST(RngStream, DeriveIsReproducibleAndDistinct) {
  const RngStream root(3, 4);
  RngStream c1 = root.derive(1);
  RngStream c1_again = root.derive(1);
  RngStream c2 = root.derive(2);
  const auto x = c1.next_u64();
  EXPECT_EQ(x, c1_again.next_u64());
  EXPECT_NE(x, c2.next_u64());
}

TEST(RngStream, UniformMomentsMatch) {
  RngStream rng(1, 1);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sum2 += u * u;
  }
  // mean 1/2 with sd 1/sqrt(12 n); second moment 1/3.
  EXPECT_NEAR(sum / n, 0.5, 4.0 / std::sqrt(12.0 * n));
  EXPECT_NEAR(sum2 / n, 1.0 / 3.0, 0.005);
}

TEST(RngStream, BelowIsUniform) {
  RngStream rng(9, 0);
  const int n = 100000;
  std::array<int, 7> counts{};
  for (int i = 0; i < n; ++i) {
    const auto k = rng.below(7);
    ASSERT_LT(k, 7u);
    ++counts[k];
  }
  const double p = 1.0 / 7.0;
  const double se = std::sqrt(p * (1 - p) / n);
  for (int c : counts) EXPECT_NEAR(double(c) / n, p, 4 * se);
}

TEST(RngStream, CategoricalFollowsWeights) {
  RngStream rng(5, 5);
  const std::vector<double> w = {1.0, 0.0, 3.0};
  const int n = 100000;
  std::array<int, 3> counts{};
  for (int i = 0; i < n; ++i) ++counts[rng.categorical(w)];
  EXPECT_EQ(counts[1], 0);
  const double se = std::sqrt(0.25 * 0.75 / n);
  EXPECT_NEAR(double(counts[0]) / n, 0.25, 4 * se);
}

TEST(RngStream, BernoulliEdgeCases) {
  RngStream rng(0, 0);
  for (int i = 0; i < 100; ++i) {
    EXPECT_FALSE(rng.bernoulli(0.0));
    EXPECT_TRUE(rng.bernoulli(1.0));
  }
}

}  // namespace
}  // namespace driftlab
