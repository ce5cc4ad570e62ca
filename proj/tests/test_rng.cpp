#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <gtest/gtest.h>
#include <spdlog/spdlog.h>

#include "causalaid/parallel.hpp"
#include "causalaid/rng.hpp"

namespace ca = causalaid;

TEST(Rng, SplitmixReferenceValue) {
  // First output of the reference splitmix64 generator started at 0.
  EXPECT_EQ(ca::splitmix64(0), 0xe220a8397b1dcdafULL);
}

TEST(Rng, FirstOutputFollowsXoshiroDefinition) {
  // xoshiro256** returns rotl(s[1] * 5, 7) * 9; s[1] is the second splitmix64 output.
  const std::uint64_t seed = 12345;
  const std::uint64_t s1 = ca::splitmix64(seed + 0x9e3779b97f4a7c15ULL);
  const std::uint64_t x = s1 * 5;
  ca::Rng rng(seed);
  EXPECT_EQ(rng.next(), ((x << 7) | (x >> 57)) * 9);
}

TEST(Rng, Deterministic) {
  ca::Rng a(7), b(7), c(8);
  bool differs = false;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    differs |= x != c.next();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, DeriveSeedSeparatesStreams) {
  std::set<std::uint64_t> seen;
  for (const char* label : {"bootstrap", "placebo", "rcc", "rsr", "forest-tree"})
    for (std::uint64_t i = 0; i < 200; ++i) seen.insert(ca::derive_seed(2023, label, i));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_EQ(ca::derive_seed(2023, "placebo", 3), ca::derive_seed(2023, "placebo", 3));
  EXPECT_NE(ca::derive_seed(2023, "placebo", 3), ca::derive_seed(2024, "placebo", 3));
}

TEST(Rng, UniformMoments) {
  ca::Rng rng(1);
  const int n = 200000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sum_sq += u * u;
  }
  EXPECT_NEAR(sum / n, 0.5, 0.005);
  EXPECT_NEAR(sum_sq / n - 0.25, 1.0 / 12.0, 0.002);
}

TEST(Rng, NormalMoments) {
  ca::Rng rng(2);
  const int n = 200000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sum_sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sum_sq / n, 1.0, 0.015);
}

TEST(Rng, UniformIndexCoversRange) {
  ca::Rng rng(3);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[rng.uniform_index(7)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 400);
}

TEST(Rng, ShuffleIsPermutation) {
  ca::Rng rng(4);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  rng.shuffle(std::span<int>(v));
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
  EXPECT_FALSE(std::is_sorted(v.begin(), v.end()));
}

TEST(Parallel, EveryIndexOnceAndNestedSerial) {
  ca::set_thread_count(4);
  std::vector<int> hits(1000, 0);
  ca::parallel_for(hits.size(), [&](std::size_t i) {
    ++hits[i];
    std::vector<int> inner(10, 0);
    ca::parallel_for(inner.size(), [&](std::size_t j) { ++inner[j]; });
    for (int x : inner) ASSERT_EQ(x, 1);
  });
  for (int h : hits) EXPECT_EQ(h, 1);
  ca::set_thread_count(0);
}

namespace {

// Library info logs would otherwise flood the test output.
const bool quiet = [] {
  spdlog::set_level(spdlog::level::warn);
  return true;
}();

}  // namespace
