#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "windtree/errors.hpp"
#include "windtree/geometry.hpp"
#include "windtree/stats.hpp"

using namespace windtree;

namespace {

const ProbabilityVector kP{0.5, 0.3, 0.2};

Vec3 vec_of(const Velocity& v) { return v.vec(); }

}  // namespace

TEST(ProbabilityVector, RejectsInvalid) {
  EXPECT_THROW(ProbabilityVector(1.0, 0.0, 0.0), ValidationError);
  EXPECT_THROW(ProbabilityVector(0.5, 0.5, 0.5), ValidationError);
  EXPECT_THROW(ProbabilityVector(-0.1, 0.6, 0.5), ValidationError);
  EXPECT_NO_THROW(ProbabilityVector(0.5, 0.3, 0.2));
}

TEST(VelocitySet, SymmetricCase) {
  const VelocitySet set(ProbabilityVector::symmetric());
  EXPECT_EQ(set.size(), 8u);
  for (const auto& v : set.all())
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(std::fabs(v[i]), 1.0 / std::sqrt(3.0), 1e-15);
}

TEST(VelocitySet, NormalizedVector) {
  const VelocitySet set(kP);
  const Velocity& v = set[0];
  EXPECT_NEAR(v[0], 0.811107, 1e-6);
  EXPECT_NEAR(v[1], 0.486664, 1e-6);
  EXPECT_NEAR(v[2], 0.324443, 1e-6);
  for (const auto& w : set.all()) EXPECT_NEAR(dot(w.vec(), w.vec()), 1.0, 1e-15);
  std::vector<std::uint8_t> bits;
  for (const auto& w : set.all()) bits.push_back(w.sign_bits());
  std::sort(bits.begin(), bits.end());
  EXPECT_EQ(std::unique(bits.begin(), bits.end()), bits.end());
}

TEST(Reflect, FlipsOneComponent) {
  const VelocitySet set(kP);
  const Velocity v = set[0];
  const Velocity w = reflect(v, 0);
  EXPECT_EQ(w[0], -v[0]);
  EXPECT_EQ(w[1], v[1]);
  const Velocity z = reflect(v, 2);
  EXPECT_NEAR(z[2], -0.324443, 1e-6);
  EXPECT_NEAR(z[0], 0.811107, 1e-6);
}

TEST(Reflect, InvolutionAndExactNorm) {
  const VelocitySet set(kP);
  for (const auto& v : set.all()) {
    for (int i = 0; i < 3; ++i) {
      EXPECT_EQ(reflect(reflect(v, i), i), v);
      for (int k = 0; k < 3; ++k) EXPECT_EQ(std::fabs(reflect(v, i)[k]), std::fabs(v[k]));
    }
  }
}

TEST(Accessible, Neighbours) {
  const VelocitySet set(kP);
  const auto nb = accessible(set[0]);
  EXPECT_EQ(nb[0].sign_bits(), 1);
  EXPECT_EQ(nb[1].sign_bits(), 2);
  EXPECT_EQ(nb[2].sign_bits(), 4);
  for (const auto& v : set.all()) {
    for (const auto& w : accessible(v)) {
      const auto back = accessible(w);
      EXPECT_TRUE(std::any_of(back.begin(), back.end(), [&](const Velocity& x) { return x == v; }));
      EXPECT_FALSE(same_parity(v, w));
    }
  }
}

TEST(Transition, FlipFrequencies) {
  const VelocitySet set(kP);
  Rng rng(1);
  const int n = 100000;
  std::array<int, 3> count{};
  Velocity v = set[0];
  for (int k = 0; k < n; ++k) {
    const Velocity w = transition_sample(set, v, rng);
    const auto axis = flipped_axis(v, w);
    ASSERT_TRUE(axis.has_value());
    ++count[static_cast<std::size_t>(*axis)];
    v = w;
  }
  for (int i = 0; i < 3; ++i) {
    const double p = kP[i];
    EXPECT_NEAR(count[static_cast<std::size_t>(i)] / double(n), p, 4 * std::sqrt(p * (1 - p) / n));
  }
}

TEST(Transition, FixedSeedSequence) {
  const VelocitySet set(kP);
  Rng a(9), b(9);
  Velocity va = set[0], vb = set[0];
  for (int k = 0; k < 1000; ++k) {
    va = transition_sample(set, va, a);
    vb = transition_sample(set, vb, b);
    ASSERT_EQ(va, vb);
  }
}

TEST(CollisionFace, HeadOnFace) {
  const VelocitySet set(kP);
  EXPECT_EQ(collision_face(set[0], reflect(set[0], 0)), (Face{0, -1}));
  EXPECT_EQ(collision_face(set[1], reflect(set[1], 0)), (Face{0, +1}));
  for (const auto& v : set.all())
    for (const auto& w : accessible(v)) EXPECT_EQ(collision_face(v, w).axis, collision_face(w, v).axis);
  EXPECT_THROW(collision_face(set[0], set[3]), DomainError);
}

TEST(SampleImpact, FaceCoordinateAndTouch) {
  const VelocitySet set(kP);
  Rng rng(2);
  const double r = 0.2;
  std::vector<double> u1, u2;
  for (int k = 0; k < 100000; ++k) {
    const ImpactParameter b = sample_impact(set[0], reflect(set[0], 0), r, rng);
    ASSERT_EQ(b.offset[0], 0.1);
    u1.push_back(b.offset[1]);
    u2.push_back(b.offset[2]);
    const CubeObstacle cube{b.offset, r / 2};
    ASSERT_FALSE(in_open_cube({0, 0, 0}, cube, 0.0));
    ASSERT_LE(max_abs(b.offset), r / 2);
  }
  auto uni = [&](double x) { return std::clamp((x + r / 2) / r, 0.0, 1.0); };
  EXPECT_GT(ks_one_sample(u1, uni).p_value, 0.01);
  EXPECT_GT(ks_one_sample(u2, uni).p_value, 0.01);
}

TEST(RayCubeEntry, FrozenExample) {
  const VelocitySet set(kP);
  const Velocity v = set[0];
  const auto hit = ray_cube_entry(Vec3{}, v, CubeObstacle{vec_of(v), 0.1});
  ASSERT_TRUE(hit.has_value());
  EXPECT_NEAR(hit->t, 0.876712, 1e-6);
  EXPECT_NEAR(hit->t, 1.0 - 0.1 / v[0], 1e-15);
  EXPECT_EQ(hit->face, (Face{0, -1}));
  EXPECT_FALSE(hit->tie);
}

TEST(RayCubeEntry, MissAndInside) {
  const VelocitySet set(kP);
  const Velocity v = set[0];
  EXPECT_FALSE(ray_cube_entry(Vec3{}, v, CubeObstacle{vec_of(v) + Vec3{0, 10, 0}, 0.1}).has_value());
  EXPECT_FALSE(ray_cube_entry(Vec3{}, v, CubeObstacle{-1.0 * vec_of(v), 0.1}).has_value());
  EXPECT_THROW(ray_cube_entry(Vec3{}, v, CubeObstacle{Vec3{}, 0.1}), DomainError);
}

TEST(RayCubeEntry, CornerTieLowestAxis) {
  const VelocitySet set(ProbabilityVector::symmetric());
  const Velocity v = set[0];
  const auto hit = ray_cube_entry(Vec3{}, v, CubeObstacle{Vec3{1, 1, 1}, 0.1});
  ASSERT_TRUE(hit.has_value());
  EXPECT_TRUE(hit->tie);
  EXPECT_EQ(hit->face.axis, 0);
}

TEST(OpenCube, TangentIsOutside) {
  const CubeObstacle cube{Vec3{0, 0, 0}, 0.5};
  EXPECT_FALSE(in_open_cube({0.5, 0, 0}, cube, 0.0));
  EXPECT_TRUE(in_open_cube({0.49, 0.2, -0.3}, cube, 0.0));
  EXPECT_FALSE(segment_hits_open_cube({-1, 0.5, 0}, {1, 0, 0}, 2.0, cube, 0.0));
  EXPECT_TRUE(segment_hits_open_cube({-1, 0.0, 0}, {1, 0, 0}, 2.0, cube, 0.0));
}

TEST(MechanicalFlight, EmptyIsStraight) {
  const VelocitySet set(kP);
  const auto f = mechanical_flight(Vec3{}, set[5], {}, 3.0);
  EXPECT_TRUE(f.events.empty());
  EXPECT_EQ(f.end, advance(Vec3{}, set[5].vec(), 3.0));
}

TEST(MechanicalFlight, SingleCubeAhead) {
  const VelocitySet set(kP);
  const Velocity v = set[0];
  const std::vector<CubeObstacle> cubes{{vec_of(v), 0.1}};
  const auto f = mechanical_flight(Vec3{}, v, cubes, 3.0);
  ASSERT_EQ(f.events.size(), 1u);
  EXPECT_NEAR(f.events[0].t, 0.876712, 1e-6);
  EXPECT_EQ(f.events[0].velocity_after, reflect(v, 0));
  EXPECT_NEAR(norm(f.end_velocity.vec()), 1.0, 1e-15);
}

// Random scenes: every reflection flips one sign, and the result does not
// depend on the order of the scatterer list.
TEST(MechanicalFlight, PermutationInvariantAndUnitSpeed) {
  const VelocitySet set(kP);
  Rng rng(17);
  for (int scene = 0; scene < 300; ++scene) {
    std::vector<CubeObstacle> cubes;
    for (int i = 0; i < 12; ++i)
      cubes.push_back({{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)}, 0.15});
    Vec3 start{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
    bool inside = std::any_of(cubes.begin(), cubes.end(), [&](const CubeObstacle& c) { return in_open_cube(start, c); });
    if (inside) continue;
    const Velocity v = set[static_cast<std::uint8_t>(rng.next_u64() & 7)];
    const auto a = mechanical_flight(start, v, cubes, 6.0);
    std::reverse(cubes.begin(), cubes.end());
    const auto b = mechanical_flight(start, v, cubes, 6.0);
    ASSERT_EQ(a.events.size(), b.events.size());
    Velocity prev = v;
    for (std::size_t k = 0; k < a.events.size(); ++k) {
      EXPECT_EQ(a.events[k].t, b.events[k].t);
      EXPECT_EQ(a.events[k].position, b.events[k].position);
      EXPECT_TRUE(flipped_axis(prev, a.events[k].velocity_after).has_value());
      prev = a.events[k].velocity_after;
    }
    EXPECT_EQ(a.end, b.end);
  }
}
