#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "windtree/flight.hpp"
#include "windtree/stats.hpp"

using namespace windtree;

namespace {

const ProbabilityVector kP{0.5, 0.3, 0.2};

FlightPath flight(double horizon, std::uint64_t seed, double r = 0.05) {
  const VelocitySet set(kP);
  Rng rng(seed);
  return sample_flight(set, set[0], horizon, r, rng);
}

}  // namespace

TEST(SampleFlight, Deterministic) {
  const FlightPath a = flight(200, 4), b = flight(200, 4);
  EXPECT_EQ(a.tau, b.tau);
  EXPECT_EQ(a.Y, b.Y);
  EXPECT_EQ(a.yprime, b.yprime);
}

TEST(SampleFlight, MeanFlightTimeAndFlipLaw) {
  const FlightPath f = flight(100000, 8);
  const std::size_t n = f.collisions();
  ASSERT_GT(n, 90000u);
  double sum = 0;
  std::array<double, 3> flips{};
  for (std::size_t k = 1; k <= n; ++k) {
    sum += f.xi(k);
    const auto axis = flipped_axis(f.u[k], f.u[k + 1]);
    ASSERT_TRUE(axis.has_value());
    flips[static_cast<std::size_t>(*axis)] += 1;
  }
  const double mean = sum / static_cast<double>(n);
  EXPECT_GE(mean, 0.99);
  EXPECT_LE(mean, 1.01);
  for (int i = 0; i < 3; ++i) {
    const double p = kP[i];
    EXPECT_NEAR(flips[static_cast<std::size_t>(i)] / n, p, 4 * std::sqrt(p * (1 - p) / n));
  }
}

TEST(SampleFlight, ParityAlternatesAndSpeedIsOne) {
  const FlightPath f = flight(500, 21);
  const Velocity v0 = f.u[1];
  double length = 0.0;
  for (std::size_t k = 1; k <= f.collisions() + 1; ++k) {
    EXPECT_EQ(same_parity(f.u[k], v0), k % 2 == 1) << k;
    EXPECT_NEAR(norm(f.u[k].vec()), 1.0, 1e-15);
  }
  for (std::size_t k = 1; k <= f.collisions(); ++k) length += f.xi(k);
  length += f.horizon - f.tau.back();
  EXPECT_NEAR(length, f.horizon, 1e-9);
}

TEST(SampleFlight, ScattererTouchesCollisionPoint) {
  const FlightPath f = flight(200, 22);
  for (std::size_t k = 1; k <= f.collisions(); ++k) {
    const CubeObstacle c = f.scatterer(k);
    EXPECT_FALSE(in_open_cube(f.Y[k], c, 1e-12));
    EXPECT_NEAR(max_abs(f.Y[k] - c.center), c.half_side, 1e-12);
  }
}

TEST(PositionAt, Basics) {
  const FlightPath f = flight(50, 5);
  EXPECT_EQ(f.position_at(0.0), Vec3{});
  const double t1 = f.tau[1];
  const Vec3 half = f.position_at(t1 / 2);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(half[i], t1 / 2 * f.u[1].vec()[i], 1e-15);
  const double s = f.tau[3] + 0.1 * f.xi(4), t = f.tau[3] + 0.7 * f.xi(4);
  EXPECT_NEAR(norm(f.position_at(t) - f.position_at(s)), t - s, 1e-12);
}

TEST(SampleFlightEndpoint, SameDrawsAsFullPath) {
  const VelocitySet set(kP);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng a(seed), b(seed);
    EXPECT_EQ(sample_flight(set, set[3], 80.0, 0.1, a).endpoint(), sample_flight_endpoint(set, set[3], 80.0, 0.1, b));
  }
}

// U_i(0) U_i(t) / v_i^2 has mean e^{-2 p_i t}.
TEST(Telegraph, Autocorrelation) {
  const VelocitySet set(kP);
  const int n = 100000;
  for (double t : {0.5, 1.0, 2.0}) {
    std::array<double, 3> acc{};
    for (int k = 0; k < n; ++k) {
      Rng rng = Rng::derive(31, {static_cast<std::uint64_t>(t * 10), static_cast<std::uint64_t>(k)});
      const FlightPath f = sample_flight(set, set[0], t + 1.0, 0.05, rng);
      const Velocity u = f.velocity_at(t);
      for (int i = 0; i < 3; ++i) acc[static_cast<std::size_t>(i)] += u.sign(i);
    }
    for (int i = 0; i < 3; ++i) {
      const double expected = std::exp(-2 * kP[i] * t);
      EXPECT_NEAR(acc[static_cast<std::size_t>(i)] / n / expected, 1.0, 0.05) << "t=" << t << " i=" << i;
    }
  }
}

TEST(Signature, Definition) {
  FlightPath f;
  f.tau = {0.0, 0.5, 2.5, 3.4};
  const Signature s = signature_of(f);
  EXPECT_EQ(s.eps, (std::vector<std::uint8_t>{1, 0, 1}));
}

TEST(Signature, MeanShortFlightFraction) {
  const FlightPath f = flight(100000, 12);
  const Signature s = signature_of(f);
  double m = 0;
  for (auto e : s.eps) m += e;
  const double n = static_cast<double>(s.eps.size());
  const double p = 1 - std::exp(-1.0);
  EXPECT_NEAR(m / n, 0.632121, 4 * std::sqrt(p * (1 - p) / n));
}

TEST(ExcursionPack, GammaAndTail) {
  const VelocitySet set(kP);
  Rng rng(40);
  std::vector<double> gammas;
  for (int k = 0; k < 100000; ++k) {
    const Pack e = sample_excursion_pack(set, set[0], 0.05, rng);
    ASSERT_GE(e.gamma, 2u);
    ASSERT_EQ(e.exit, set[0]);
    ASSERT_EQ(e.xi.size(), e.gamma);
    gammas.push_back(static_cast<double>(e.gamma));
  }
  const TailFit fit = fit_tail(gammas);
  EXPECT_LT(fit.slope, 0.0);
  EXPECT_GT(fit.r_squared, 0.95);
}

// Concatenated excursions against one-shot flights: position after a fixed
// number of collisions.
TEST(ExcursionPack, ConcatenationReproducesFlightLaw) {
  const VelocitySet set(kP);
  const std::size_t count = 12;
  const int n = 5000;
  std::vector<Vec3> a, b;
  for (int k = 0; k < n; ++k) {
    Rng rng = Rng::derive(41, {0, static_cast<std::uint64_t>(k)});
    const VirtualCollision vc = sample_virtual_collision(set, set[0], 0.05, rng);
    std::vector<Pack> packs;
    std::size_t total = 0;
    while (total < count) {
      packs.push_back(sample_excursion_pack(set, set[0], 0.05, rng));
      total += packs.back().gamma;
    }
    a.push_back(concatenate(packs, set[0], vc, 0.05).path.Y[count]);
    Rng other = Rng::derive(41, {1, static_cast<std::uint64_t>(k)});
    b.push_back(sample_flight_collisions(set, set[0], count, 0.05, other).Y[count]);
  }
  EXPECT_GT(energy_test(a, b, 199, 5).p_value, 0.01);
}

TEST(LegPack, GammaRuleAndLongEnds) {
  const VelocitySet set(kP);
  Rng rng(50);
  std::vector<double> gammas, thetas;
  for (int k = 0; k < 100000; ++k) {
    const Pack leg = sample_leg_pack(set, set[0], 0.05, rng);
    const std::size_t g = leg.gamma;
    ASSERT_TRUE(g == 2 || g >= 5) << g;
    ASSERT_GT(leg.xi[0], 1.0);
    ASSERT_GT(leg.xi[1], 1.0);
    ASSERT_GT(leg.xi[g - 2], 1.0);
    ASSERT_GT(leg.xi[g - 1], 1.0);
    gammas.push_back(static_cast<double>(g));
    thetas.push_back(leg.theta());
  }
  EXPECT_LT(fit_tail(gammas).slope, 0.0);
  EXPECT_LT(fit_tail(thetas).slope, 0.0);
  EXPECT_FALSE(leg_stop_allowed(3));
  EXPECT_FALSE(leg_stop_allowed(4));
  EXPECT_TRUE(leg_stop_allowed(2));
  EXPECT_TRUE(leg_stop_allowed(5));
}

TEST(ReversePack, InvolutionAndBackwardEndpoint) {
  const VelocitySet set(kP);
  Rng rng(60);
  for (int k = 0; k < 2000; ++k) {
    const Pack leg = sample_leg_pack(set, set[0], 0.05, rng);
    const Pack rev = reverse_pack(leg);
    EXPECT_EQ(reverse_pack(rev), leg);
    EXPECT_EQ(rev.gamma, leg.gamma);
    EXPECT_NEAR(rev.theta(), leg.theta(), 1e-12 * leg.theta());
    EXPECT_NEAR(norm(pack_endpoint(rev)), norm(pack_endpoint(leg)), 1e-9);
    const auto pts = backward_leg_points(leg);
    ASSERT_EQ(pts.size(), leg.gamma + 1);
    EXPECT_NEAR(max_abs(pts.front()), 0.0, 1e-12);
    EXPECT_NEAR(norm(pts.back()), norm(pack_endpoint(leg)), 1e-9);
  }
}

TEST(Concatenate, SinglePackMatchesOwnPath) {
  const VelocitySet set(kP);
  Rng rng(70);
  const VirtualCollision vc = sample_virtual_collision(set, set[0], 0.05, rng);
  const Pack e = sample_excursion_pack(set, set[0], 0.05, rng);
  const std::vector<Pack> one{e};
  const Concatenation c = concatenate(one, set[0], vc, 0.05);
  const FlightPath own = pack_path(e, vc, 0.05);
  EXPECT_EQ(c.path.tau, own.tau);
  EXPECT_EQ(c.path.Y, own.Y);
  EXPECT_EQ(c.path.yprime, own.yprime);
}

TEST(Concatenate, LabelsAreSums) {
  const VelocitySet set(kP);
  Rng rng(71);
  const VirtualCollision vc = sample_virtual_collision(set, set[0], 0.05, rng);
  std::vector<Pack> packs;
  for (int k = 0; k < 50; ++k) packs.push_back(sample_excursion_pack(set, set[0], 0.05, rng));
  const Concatenation c = concatenate(packs, set[0], vc, 0.05);
  double theta = 0;
  std::size_t gamma = 0;
  for (std::size_t k = 0; k < packs.size(); ++k) {
    theta += packs[k].theta();
    gamma += packs[k].gamma;
    EXPECT_EQ(c.index.Theta[k + 1], theta);
    EXPECT_EQ(c.index.Gamma[k + 1], gamma);
    EXPECT_EQ(c.path.tau[gamma], theta);
  }
}

TEST(Concatenate, IncrementsUncorrelated) {
  const VelocitySet set(kP);
  Rng rng(72);
  const VirtualCollision vc = sample_virtual_collision(set, set[0], 0.05, rng);
  std::vector<Pack> packs;
  for (int k = 0; k < 10001; ++k) packs.push_back(sample_excursion_pack(set, set[0], 0.05, rng));
  const Concatenation c = concatenate(packs, set[0], vc, 0.05);
  for (std::size_t i = 0; i < 3; ++i) {
    std::vector<double> a, b;
    for (std::size_t k = 1; k + 1 < c.index.Xi.size(); ++k) {
      a.push_back(c.index.Xi[k][i] - c.index.Xi[k - 1][i]);
      b.push_back(c.index.Xi[k + 1][i] - c.index.Xi[k][i]);
    }
    EXPECT_LT(std::fabs(pearson(a, b)) * std::sqrt(static_cast<double>(a.size())), 4.0);
  }
}
