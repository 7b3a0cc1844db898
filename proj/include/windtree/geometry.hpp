#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "windtree/rng.hpp"
#include "windtree/vec3.hpp"

namespace windtree {

// Absolute tolerance for membership tests, in mean-free-path units.
inline constexpr double kGeomTol = 1e-12;
// Guard against trapped particles in mechanical flight.
inline constexpr std::size_t kMaxEvents = 1'000'000;

/// Probability vector p with p_i > 0 and p_1 + p_2 + p_3 = 1.
class ProbabilityVector {
 public:
  ProbabilityVector(double p1, double p2, double p3);
  static ProbabilityVector symmetric() { return {1.0 / 3, 1.0 / 3, 1.0 / 3}; }

  double operator[](int i) const { return p_[static_cast<std::size_t>(i)]; }
  double norm() const { return norm_; }
  const std::array<double, 3>& values() const { return p_; }

  friend bool operator==(const ProbabilityVector&, const ProbabilityVector&) = default;

 private:
  std::array<double, 3> p_;
  double norm_;
};

/// Element of the 8-point velocity lattice. Bit i of sign_bits() is set when
/// component i is negative; magnitudes are p_i/|p| of the generating vector.
class Velocity {
 public:
  Velocity() = default;
  Velocity(const ProbabilityVector& p, std::uint8_t sign_bits);

  std::uint8_t sign_bits() const { return bits_; }
  int sign(int axis) const { return (bits_ >> axis) & 1U ? -1 : 1; }
  double operator[](int axis) const { return v_[static_cast<std::size_t>(axis)]; }
  const Vec3& vec() const { return v_; }

  // Negates component `axis` exactly.
  Velocity reflected(int axis) const;

  friend bool operator==(const Velocity& a, const Velocity& b) {
    return a.bits_ == b.bits_ && a.v_ == b.v_;
  }

 private:
  Vec3 v_{};
  std::uint8_t bits_ = 0;
};

/// All eight lattice velocities for one p, indexed by sign bits.
class VelocitySet {
 public:
  explicit VelocitySet(const ProbabilityVector& p);

  const ProbabilityVector& p() const { return p_; }
  const Velocity& operator[](std::uint8_t bits) const { return all_[bits & 7U]; }
  const std::array<Velocity, 8>& all() const { return all_; }
  std::size_t size() const { return all_.size(); }

 private:
  ProbabilityVector p_;
  std::array<Velocity, 8> all_;
};

/// Cube face; axis in {0,1,2}, side in {-1,+1}.
struct Face {
  int axis = 0;
  int side = 1;
  friend bool operator==(const Face&, const Face&) = default;
};

/// Scatterer center minus collision point.
struct ImpactParameter {
  Vec3 offset{};
  friend bool operator==(const ImpactParameter&, const ImpactParameter&) = default;
};

struct CubeObstacle {
  Vec3 center{};
  double half_side = 0.0;
};

VelocitySet build_velocity_set(const ProbabilityVector& p);

Velocity reflect(const Velocity& v, int axis);

// The three single-sign-flip neighbours, ordered by flipped axis.
std::array<Velocity, 3> accessible(const Velocity& v);

// Axis on which v and w differ, if they differ in exactly one sign.
std::optional<int> flipped_axis(const Velocity& v, const Velocity& w);

// True when v and w lie in the same parity class (even number of flips apart).
bool same_parity(const Velocity& v, const Velocity& w);

// Axis i with probability p_i.
int sample_flip_axis(const ProbabilityVector& p, Rng& rng);

Velocity transition_sample(const VelocitySet& set, const Velocity& v, Rng& rng);

// Face struck by a particle moving with v that leaves with w.
// Throws DomainError if w is not a neighbour of v.
Face collision_face(const Velocity& v, const Velocity& w);

ImpactParameter sample_impact(const Velocity& v, const Velocity& w, double r, Rng& rng);

struct RayHit {
  double t = 0.0;
  Face face{};
  bool tie = false;  // two slab entry times coincided (corner or edge)
};

bool in_open_cube(const Vec3& point, const CubeObstacle& cube, double tol = kGeomTol);

/// First entry of origin + t v into the open cube for t > kGeomTol.
/// Throws DomainError when the origin is inside the open cube.
std::optional<RayHit> ray_cube_entry(const Vec3& origin, const Vec3& v, const CubeObstacle& cube);
std::optional<RayHit> ray_cube_entry(const Vec3& origin, const Velocity& v, const CubeObstacle& cube);

/// Parameter interval where origin + s dir, s in [0, length], lies in the
/// cube interior shrunk by tol. Empty unless the overlap has positive length.
std::optional<std::pair<double, double>> segment_open_cube_overlap(
    const Vec3& origin, const Vec3& dir, double length, const CubeObstacle& cube,
    double tol = kGeomTol);

inline bool segment_hits_open_cube(const Vec3& origin, const Vec3& dir, double length,
                                   const CubeObstacle& cube, double tol = kGeomTol) {
  return segment_open_cube_overlap(origin, dir, length, cube, tol).has_value();
}

struct CollisionEvent {
  double t = 0.0;  // elapsed time since the start of the flight
  Vec3 position{};
  Face face{};
  std::size_t scatterer = 0;  // index into the scatterer span
  Velocity velocity_after{};
  bool tie = false;
};

struct FlightSegmentList {
  Vec3 start{};
  Velocity start_velocity{};
  double duration = 0.0;
  std::vector<CollisionEvent> events;
  Vec3 end{};
  Velocity end_velocity{};
  std::size_t ties = 0;
};

/// Elastic flight among the given cubes only. Simultaneous entries into
/// several cubes resolve to the lexicographically smallest center, so the
/// result does not depend on the order of `scatterers`.
FlightSegmentList mechanical_flight(const Vec3& start, const Velocity& v,
                                    std::span<const CubeObstacle> scatterers, double duration);

}  // namespace windtree
