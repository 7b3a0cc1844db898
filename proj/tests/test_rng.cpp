#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "windtree/rng.hpp"
#include "windtree/stats.hpp"

using namespace windtree;

TEST(Rng, SameSeedSameSequence) {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, DeriveSeparatesKeys) {
  std::set<std::uint64_t> firsts;
  for (std::uint64_t k = 0; k < 1000; ++k) firsts.insert(Rng::derive(7, {1, k}).next_u64());
  EXPECT_EQ(firsts.size(), 1000u);
  EXPECT_NE(hash_keys(7, {1, 2}), hash_keys(7, {2, 1}));
  EXPECT_EQ(hash_keys(7, {1, 2}), hash_keys(7, {1, 2}));
}

TEST(Rng, UniformOpenInterval) {
  Rng rng(3);
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Rng, ExponentialPassesKs) {
  Rng rng(11);
  std::vector<double> x(100000);
  for (auto& v : x) v = rng.exponential();
  EXPECT_GT(ks_one_sample(x, exponential_cdf).p_value, 0.01);
}

// EXP(1) conditioned on [0,1): cdf (1 - e^-x) / (1 - e^-1).
TEST(Rng, TruncatedExponentials) {
  Rng rng(12);
  std::vector<double> lo(50000), hi(50000);
  for (auto& v : lo) {
    v = rng.exponential_below_one();
    ASSERT_GE(v, 0.0);
    ASSERT_LT(v, 1.0);
  }
  for (auto& v : hi) {
    v = rng.exponential_above_one();
    ASSERT_GE(v, 1.0);
  }
  const double mass = 1.0 - std::exp(-1.0);
  EXPECT_GT(ks_one_sample(lo, [&](double x) { return x <= 0 ? 0.0 : x >= 1 ? 1.0 : (1 - std::exp(-x)) / mass; })
                .p_value,
            0.01);
  EXPECT_GT(ks_one_sample(hi, [](double x) { return x <= 1 ? 0.0 : 1 - std::exp(-(x - 1)); }).p_value, 0.01);
}

TEST(Rng, PoissonMeanAndVariance) {
  for (double mean : {0.3, 4.0, 60.0}) {
    Rng rng(static_cast<std::uint64_t>(mean * 10));
    const int n = 100000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
      const double k = static_cast<double>(rng.poisson(mean));
      s += k;
      s2 += k * k;
    }
    const double m = s / n;
    const double var = s2 / n - m * m;
    EXPECT_NEAR(m, mean, 4.0 * std::sqrt(mean / n)) << mean;
    EXPECT_NEAR(var / mean, 1.0, 0.05) << mean;
  }
}

TEST(Rng, NormalPassesKs) {
  Rng rng(5);
  std::vector<double> x(100000);
  for (auto& v : x) v = rng.normal();
  EXPECT_GT(ks_one_sample(x, normal_cdf).p_value, 0.01);
}
