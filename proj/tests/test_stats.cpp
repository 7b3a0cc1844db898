#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "windtree/errors.hpp"
#include "windtree/flight.hpp"
#include "windtree/occupation.hpp"
#include "windtree/parallel.hpp"
#include "windtree/stats.hpp"

using namespace windtree;

namespace {

const ProbabilityVector kP{0.5, 0.3, 0.2};

// Kolmogorov survival series 2 sum (-1)^{k-1} exp(-2 k^2 x^2).
double kolmogorov_q(double x) {
  double s = 0.0;
  for (int k = 1; k <= 200; ++k) s += (k % 2 ? 2.0 : -2.0) * std::exp(-2.0 * k * k * x * x);
  return std::clamp(s, 0.0, 1.0);
}

std::vector<Vec3> endpoints(const ProbabilityVector& p, double T, std::size_t n, std::uint64_t seed) {
  const VelocitySet set(p);
  return parallel_map<Vec3>(n, 1, [&](std::size_t k) {
    Rng rng = Rng::derive(seed, {k});
    const Velocity v0 = set[static_cast<std::uint8_t>(rng.next_u64() & 7U)];
    return sample_flight_endpoint(set, v0, T, 0.1, rng);
  });
}

}  // namespace

TEST(Cdf, KnownValues) {
  EXPECT_NEAR(normal_cdf(0.0), 0.5, 1e-15);
  EXPECT_NEAR(normal_cdf(1.959963984540054), 0.975, 1e-12);
  EXPECT_NEAR(exponential_cdf(1.0), 1 - std::exp(-1.0), 1e-15);
  EXPECT_EQ(exponential_cdf(-1.0), 0.0);
}

TEST(Kolmogorov, MatchesSeriesWithCorrection) {
  for (double n : {20.0, 400.0, 1e6}) {
    const double f = std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n);
    for (double x : {0.5, 0.9, 1.2238, 1.3581, 1.6276}) {
      EXPECT_NEAR(kolmogorov_pvalue(x / f, n), kolmogorov_q(x), 1e-9) << n << " " << x;
    }
  }
  EXPECT_NEAR(kolmogorov_q(1.3581), 0.05, 1e-4);
}

TEST(Ks, OneSample) {
  Rng rng(1);
  std::vector<double> u(20000), shifted(20000);
  for (auto& x : u) x = rng.uniform();
  for (auto& x : shifted) x = std::min(1.0, rng.uniform() + 0.03);
  auto cdf = [](double x) { return std::clamp(x, 0.0, 1.0); };
  EXPECT_GT(ks_one_sample(u, cdf).p_value, 0.01);
  EXPECT_LT(ks_one_sample(shifted, cdf).p_value, 1e-6);
  // Exact statistic for a tiny sample: points 0.1, 0.5, 0.9 give D = 0.2333...
  EXPECT_NEAR(ks_one_sample({0.9, 0.1, 0.5}, cdf).d, 0.7 / 3.0, 1e-12);
}

TEST(Ks, TwoSample) {
  Rng rng(2);
  std::vector<double> a(5000), b(5000), c(5000);
  for (auto& x : a) x = rng.exponential();
  for (auto& x : b) x = rng.exponential();
  for (auto& x : c) x = 1.1 * rng.exponential();
  EXPECT_GT(ks_two_sample(a, b).p_value, 0.01);
  EXPECT_LT(ks_two_sample(a, c).p_value, 0.01);
  EXPECT_NEAR(ks_two_sample({1, 2, 3}, {4, 5, 6}).d, 1.0, 1e-15);
}

TEST(EnergyTest, SameVersusShifted) {
  Rng rng(3);
  std::vector<Vec3> a, b, c;
  for (int k = 0; k < 400; ++k) {
    a.push_back({rng.normal(), rng.normal(), rng.normal()});
    b.push_back({rng.normal(), rng.normal(), rng.normal()});
    c.push_back({rng.normal() + 0.5, rng.normal(), rng.normal()});
  }
  EXPECT_GT(energy_test(a, b, 199, 4).p_value, 0.01);
  EXPECT_LE(energy_test(a, c, 199, 4).p_value, 0.01);
}

TEST(EnergyTest, ThreadCountFree) {
  Rng rng(5);
  std::vector<Vec3> a, b;
  for (int k = 0; k < 300; ++k) {
    a.push_back({rng.normal(), rng.normal(), rng.normal()});
    b.push_back({rng.exponential(), rng.normal(), rng.normal()});
  }
  const auto one = energy_test(a, b, 99, 6, 1);
  const auto four = energy_test(a, b, 99, 6, 4);
  EXPECT_EQ(one.statistic, four.statistic);
  EXPECT_EQ(one.p_value, four.p_value);
}

TEST(Wilson, KnownInterval) {
  const Interval ci = wilson_interval(5, 10);
  EXPECT_NEAR(ci.lo, 0.236593, 1e-5);
  EXPECT_NEAR(ci.hi, 0.763407, 1e-5);
  const Interval zero = wilson_interval(0, 50);
  EXPECT_NEAR(zero.lo, 0.0, 1e-15);
  EXPECT_GT(zero.hi, 0.0);
}

TEST(Wilson, CoverageOnBernoulli) {
  for (double p : {0.05, 0.3}) {
    Rng rng(static_cast<std::uint64_t>(p * 100));
    const int reps = 4000, n = 200;
    int covered = 0;
    for (int k = 0; k < reps; ++k) {
      std::uint64_t s = 0;
      for (int i = 0; i < n; ++i) s += rng.uniform() < p;
      const Interval ci = wilson_interval(s, n);
      covered += ci.lo <= p && p <= ci.hi;
    }
    const double cov = covered / double(reps);
    EXPECT_GT(cov, 0.93) << p;
    EXPECT_LT(cov, 0.975) << p;
  }
}

TEST(FitLogSlope, ExactPowerLaws) {
  for (double a : {1.0, 2.0}) {
    std::vector<std::pair<double, double>> pts;
    for (double r : {0.1, 0.05, 0.025, 0.0125}) pts.push_back({r, 3.0 * std::pow(r, a)});
    const ScalingFit fit = fit_log_slope(pts);
    EXPECT_NEAR(fit.slope, a, 1e-12);
    EXPECT_NEAR(fit.intercept, std::log(3.0), 1e-12);
    EXPECT_NEAR(fit.r_squared, 1.0, 1e-12);
  }
  EXPECT_THROW(fit_log_slope({{0.1, 1.0}, {0.05, 0.0}, {0.02, 0.3}}), DomainError);
}

TEST(FitTail, ExponentialSlope) {
  Rng rng(7);
  std::vector<double> x(100000);
  for (auto& v : x) v = rng.exponential();
  const TailFit fit = fit_tail(x);
  EXPECT_NEAR(fit.slope, -1.0, 0.05);
  EXPECT_GT(fit.r_squared, 0.99);
}

TEST(Pearson, Extremes) {
  const std::vector<double> a{1, 2, 3, 4}, b{2, 4, 6, 8}, c{8, 6, 4, 2};
  EXPECT_NEAR(pearson(a, b), 1.0, 1e-15);
  EXPECT_NEAR(pearson(a, c), -1.0, 1e-15);
}

TEST(Moments, SmallSample) {
  const Moments3 m = moments({{1, 0, 0}, {3, 2, 0}, {5, 4, 0}});
  EXPECT_EQ(m.n, 3u);
  EXPECT_NEAR(m.mean[0], 3.0, 1e-15);
  EXPECT_NEAR(m.cov[0][0], 4.0, 1e-15);
  EXPECT_NEAR(m.cov[0][1], 4.0, 1e-15);
  EXPECT_NEAR(m.cov[2][2], 0.0, 1e-15);
}

// Symmetric weights: v_i^2 / p_i = 1 on every axis.
TEST(EndpointCovariance, SymmetricIsIdentity) {
  const ProbabilityVector sym = ProbabilityVector::symmetric();
  const double T = 1000;
  const auto rep = endpoint_covariance(endpoints(sym, T, 10000, 11), T, sym);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(rep.derived[i], 1.0, 1e-12);
    EXPECT_NEAR(rep.bare[i], 1.0 / 3.0, 1e-12);
    EXPECT_NEAR(rep.empirical.cov[i][i], 1.0, 0.05);
    EXPECT_LT(std::fabs(rep.offdiag_z[i]), 4.0);
  }
}

// Telegraph variance of the integral of v_i s_i(t) over [0, T]:
// v_i^2 (T / p_i - (1 - e^{-2 p_i T}) / (2 p_i^2)).
TEST(EndpointCovariance, TelegraphOracle) {
  const double T = 50;
  const auto rep = endpoint_covariance(endpoints(kP, T, 20000, 12), T, kP);
  const VelocitySet set(kP);
  for (int i = 0; i < 3; ++i) {
    const double v2 = set[0][i] * set[0][i];
    const double p = kP[i];
    const double exact = v2 * (T / p - (1 - std::exp(-2 * p * T)) / (2 * p * p)) / T;
    const auto ui = static_cast<std::size_t>(i);
    EXPECT_NEAR(rep.empirical.cov[ui][ui], exact, 4 * rep.empirical.var_se[ui]) << i;
  }
}

TEST(Gaussianity, ShortHorizonIsRejected) {
  const auto ks = gaussianity(endpoints(kP, 1.0, 5000, 13));
  for (const auto& k : ks) EXPECT_LT(k.p_value, 0.01);
}

TEST(LinInd, DependentVelocitiesRejected) {
  const VelocitySet set(kP);
  EXPECT_THROW(make_lin_ind_setup(set[0], set[7], set[1], Vec3{1, 1, 1}, 0.1), DomainError);
  EXPECT_THROW(make_lin_ind_setup(set[0], set[0], set[1], Vec3{1, 1, 1}, 0.1), DomainError);
}

// Conditional probability against a midpoint-rule integral of the hit
// indicator over xi1 with the EXP(1) density.
TEST(LinInd, ConditionalMatchesQuadrature) {
  const VelocitySet set(kP);
  const double r = 0.2;
  const LinIndSetup q = make_lin_ind_setup(set[0], set[1], set[3], set[0].vec() + set[1].vec() + 0.5 * set[3].vec(), r);
  Rng rng(14);
  int nonzero = 0;
  for (int k = 0; k < 200; ++k) {
    const double xi2 = rng.uniform(0.5, 1.5), xi3 = rng.uniform(0.2, 2.0);
    const int steps = 200000;
    const double top = 6.0, dx = top / steps;
    double integral = 0;
    for (int s = 0; s < steps; ++s) {
      const double x = (s + 0.5) * dx;
      if (lin_ind_hit(q, x, xi2, xi3)) integral += std::exp(-x) * dx;
    }
    const double closed = lin_ind_conditional(q, xi2, xi3);
    EXPECT_NEAR(closed, integral, 2e-4) << xi2 << " " << xi3;
    nonzero += closed > 0;
  }
  EXPECT_GT(nonzero, 10);
}

TEST(LinInd, MethodsAgreeAndFarTargetIsZero) {
  const VelocitySet set(kP);
  const Vec3 s = set[0].vec() + set[1].vec() + 0.5 * set[3].vec();
  const auto rep = lin_ind_probability(make_lin_ind_setup(set[0], set[1], set[3], s, 0.1), 200000, 15);
  EXPECT_GT(rep.p_slab, 0.0);
  EXPECT_LT(std::fabs(rep.diff), 4 * rep.se_diff + 1e-12);
  const auto far = lin_ind_probability(make_lin_ind_setup(set[0], set[1], set[3], Vec3{50, 50, 50}, 0.1), 20000, 16);
  EXPECT_LT(far.p_geometric, 1e-3);
  EXPECT_LT(far.p_slab, 1e-3);
}

TEST(Occupation, ChordFormula) {
  const Vec3 c{1, 0, 0};
  EXPECT_NEAR(segment_ball_chord({0, 0, 0}, {1, 0, 0}, 3.0, c, 0.5), 1.0, 1e-12);
  EXPECT_NEAR(segment_ball_chord({0, 0, 0}, {1, 0, 0}, 1.0, c, 0.5), 0.5, 1e-12);
  EXPECT_NEAR(segment_ball_chord({0, 0.3, 0}, {1, 0, 0}, 3.0, c, 0.5), 0.8, 1e-12);
  EXPECT_EQ(segment_ball_chord({0, 0.6, 0}, {1, 0, 0}, 3.0, c, 0.5), 0.0);
  EXPECT_EQ(segment_ball_chord({0, 0, 0}, {-1, 0, 0}, 3.0, c, 0.5), 0.0);
}

TEST(Occupation, KacMeanAndMonotoneMeasures) {
  const VelocitySet set(kP);
  const double r = 0.25;
  const BallGrid grid = default_grid(r, 3.0);
  const auto hist = occupation_estimate(set, set[0], r, grid, 3000, 3, 17);
  EXPECT_NEAR(hist.mean_theta, 8.0, 4 * hist.theta_se);
  EXPECT_NEAR(hist.mean_h_total, 8.0, 4 * hist.theta_se);
  ASSERT_EQ(hist.g.size(), grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    EXPECT_GE(hist.G[i], hist.g[i]);
    EXPECT_GE(hist.H[i], hist.h[i]);
  }
  const std::vector<double> flat(grid.size(), 1.0);
  for (double v : radial_profile(hist, flat, 0.5, 2.5, 4)) EXPECT_NEAR(v, 1.0, 1e-12);
}
