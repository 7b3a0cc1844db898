#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "windtree/environment.hpp"
#include "windtree/errors.hpp"
#include "windtree/parallel.hpp"
#include "windtree/stats.hpp"

using namespace windtree;

namespace {

const ProbabilityVector kP{0.5, 0.3, 0.2};
// Only the first flight is used; P(none before the horizon) = e^-6.
const double kHorizon = 6.0;

struct FirstFlight {
  double t = 0.0;
  int axis = -1;
};

FirstFlight first_flight(const VelocitySet& set, double r, std::uint64_t k) {
  Rng pick = Rng::derive(99, {k});
  const Velocity v = set[static_cast<std::uint8_t>(pick.next_u64() & 7U)];
  for (std::uint64_t a = 0;; ++a) {
    const PoissonEnvironment env = make_environment(set, v, r, IntensityMode::calibrated, hash_keys(98, {k, a}), false);
    const auto d = simulate_direct(env, v, kHorizon);
    if (!d) continue;
    if (d->events.empty()) return {kHorizon, -1};
    return {d->events.front().t, d->events.front().face.axis};
  }
}

}  // namespace

TEST(Intensity, Calibration) {
  const double r = 0.1;
  const auto sym = calibrate_intensity(ProbabilityVector::symmetric(), r);
  EXPECT_NEAR(sym.calibrated, 1.0 / (r * r) / std::sqrt(3.0), 1e-9);
  const auto c = calibrate_intensity(kP, r);
  EXPECT_NEAR(c.calibrated, kP.norm() / (r * r), 1e-9);
  EXPECT_NEAR(c.nominal / c.calibrated, 1.0 / (kP.norm() * kP.norm()), 1e-12);
  EXPECT_EQ(intensity_for(kP, r, IntensityMode::nominal), c.nominal);
}

TEST(PoissonEnvironment, CellIsPureFunctionOfSeed) {
  const PoissonEnvironment a(50.0, 0.1, 7), b(50.0, 0.1, 7), c(50.0, 0.1, 8);
  const CellCoord cell{3, -2, 11};
  const auto x = a.scatterers_in_cell(cell);
  const auto y = b.scatterers_in_cell(cell);
  ASSERT_EQ(x.size(), y.size());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(x[i].center, y[i].center);
  const auto z = c.scatterers_in_cell(cell);
  EXPECT_FALSE(z.size() == x.size() && !z.empty() && z[0].center == x[0].center);
  for (const auto& cube : x) EXPECT_EQ(a.cell_of(cube.center), cell);
}

TEST(PoissonEnvironment, CountsArePoissonAndIndependent) {
  const double intensity = 20.0;
  const PoissonEnvironment env(intensity, 0.1, 3);
  const double mean = intensity * std::pow(env.cell_size(), 3);
  const int n = 10000;
  std::vector<double> a, b;
  double sum = 0;
  for (int i = 0; i < n; ++i) {
    const double ka = static_cast<double>(env.scatterers_in_cell({i, 0, 0}).size());
    const double kb = static_cast<double>(env.scatterers_in_cell({i, 1, 0}).size());
    sum += ka;
    a.push_back(ka);
    b.push_back(kb);
  }
  EXPECT_NEAR(sum / n, mean, 4 * std::sqrt(mean / n));
  EXPECT_LT(std::fabs(pearson(a, b)) * std::sqrt(double(n)), 4.0);
}

TEST(PoissonEnvironment, RejectsBadParameters) {
  EXPECT_THROW(PoissonEnvironment(0.0, 0.1, 1), ValidationError);
  EXPECT_THROW(PoissonEnvironment(1.0, -0.1, 1), ValidationError);
  EXPECT_THROW(PoissonEnvironment(1.0, 0.5, 1, 1.0), ValidationError);
}

TEST(SimulateDirect, EmptyEnvironmentIsStraight) {
  const VelocitySet set(kP);
  const PoissonEnvironment env(1e-9, 0.1, 1);
  const auto d = simulate_direct(env, set[6], 25.0);
  ASSERT_TRUE(d.has_value());
  EXPECT_TRUE(d->events.empty());
  EXPECT_EQ(d->end, advance(Vec3{}, set[6].vec(), 25.0));
}

TEST(SimulateDirect, Deterministic) {
  const VelocitySet set(kP);
  const PoissonEnvironment env = make_environment(set, set[0], 0.1, IntensityMode::calibrated, 5, true);
  const auto a = simulate_direct(env, set[0], 50.0);
  const auto b = simulate_direct(env, set[0], 50.0);
  ASSERT_EQ(a.has_value(), b.has_value());
  if (!a) return;
  ASSERT_EQ(a->events.size(), b->events.size());
  for (std::size_t k = 0; k < a->events.size(); ++k) {
    EXPECT_EQ(a->events[k].t, b->events[k].t);
    EXPECT_EQ(a->events[k].scatterer, b->events[k].scatterer);
  }
  EXPECT_EQ(a->end, b->end);
}

TEST(SimulateDirect, InitialCubeTouchesOrigin) {
  const VelocitySet set(kP);
  const double r = 0.1;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const PoissonEnvironment env = make_environment(set, set[0], r, IntensityMode::calibrated, seed, true);
    ASSERT_TRUE(env.initial_scatterer().has_value());
    const CubeObstacle c = *env.initial_scatterer();
    EXPECT_FALSE(in_open_cube(Vec3{}, c, 0.0));
    EXPECT_NEAR(max_abs(c.center), r / 2, 1e-15);
    // The particle leaves the time-0 cube immediately.
    EXPECT_FALSE(ray_cube_entry(Vec3{}, set[0], c).has_value());
  }
}

// Fresh environment per flight: first flight time EXP(1), mean within 2% (4 se),
// and struck-axis frequencies p_i.
TEST(SimulateDirect, FlightLawAtCalibratedIntensity) {
  const VelocitySet set(kP);
  const std::size_t n = 40000;
  const auto flights = parallel_map<FirstFlight>(n, 1, [&](std::size_t k) { return first_flight(set, 0.1, k); });
  std::vector<double> times;
  std::array<double, 3> axes{};
  double sum = 0;
  for (const auto& f : flights) {
    times.push_back(f.t);
    sum += f.t;
    if (f.axis >= 0) axes[static_cast<std::size_t>(f.axis)] += 1;
  }
  EXPECT_NEAR(sum / n, 1.0, 0.02);
  std::vector<double> first(times.begin(), times.begin() + 10000);
  EXPECT_GT(ks_one_sample(first, exponential_cdf).p_value, 0.01);
  for (int i = 0; i < 3; ++i) {
    const double p = kP[i];
    EXPECT_NEAR(axes[static_cast<std::size_t>(i)] / n, p, 4 * std::sqrt(p * (1 - p) / n));
  }
}

TEST(SimulateDirect, NominalIntensityIsFaster) {
  const VelocitySet set(kP);
  double sum = 0;
  const int n = 4000;
  for (int k = 0; k < n; ++k) {
    for (std::uint64_t a = 0;; ++a) {
      const PoissonEnvironment env =
          make_environment(set, set[0], 0.1, IntensityMode::nominal, hash_keys(4, {std::uint64_t(k), a}), false);
      const auto d = simulate_direct(env, set[0], kHorizon);
      if (!d) continue;
      sum += d->events.empty() ? kHorizon : d->events.front().t;
      break;
    }
  }
  // Mean free time |p|^2 at the literal intensity.
  EXPECT_NEAR(sum / n, kP.norm() * kP.norm(), 5 * kP.norm() * kP.norm() / std::sqrt(double(n)));
}

TEST(MechanicalFlight, RunawayGuard) {
  const VelocitySet set(kP);
  // Two huge cubes leave a thin corridor perpendicular to axis 0.
  const std::vector<CubeObstacle> walls{{{-1e6 - 0.005, 0, 0}, 1e6}, {{1e6 + 0.005, 0, 0}, 1e6}};
  EXPECT_THROW(mechanical_flight(Vec3{}, set[0], walls, 1e9), RunawayError);
}
