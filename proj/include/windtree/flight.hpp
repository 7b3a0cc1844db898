#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "windtree/geometry.hpp"
#include "windtree/trajectory.hpp"

namespace windtree {

// Guard on pack length; the tail of gamma is exponential so this never trips
// for valid inputs.
inline constexpr std::size_t kMaxPackLength = 1'000'000;

/// Markovian flight path. Index k >= 1 labels the k-th collision; entry 0 is
/// the virtual collision at time 0.
///   tau[k]    collision times, tau[0] = 0
///   u[k]      velocity on [tau[k-1], tau[k]); u[0] is the pre-initial velocity
///   Y[k]      position at tau[k]
///   beta[k]   impact parameter of collision k (u[k] -> u[k+1])
///   yprime[k] virtual scatterer center Y[k] + beta[k]
/// u has one more entry than tau: u.back() is the velocity after the last
/// collision, flown until the horizon.
struct FlightPath {
  std::vector<double> tau;
  std::vector<Velocity> u;
  std::vector<Vec3> Y;
  std::vector<ImpactParameter> beta;
  std::vector<Vec3> yprime;
  double horizon = 0.0;
  double r = 0.0;

  std::size_t collisions() const { return tau.size() - 1; }
  double xi(std::size_t k) const { return tau[k] - tau[k - 1]; }
  Vec3 endpoint() const { return position_at(horizon); }
  Vec3 position_at(double t) const;
  Velocity velocity_at(double t) const;
  Trajectory trajectory() const;
  CubeObstacle scatterer(std::size_t k) const { return {yprime[k], 0.5 * r}; }
};

struct Signature {
  std::vector<std::uint8_t> eps;
};

/// Generating data of an excursion or a leg: gamma flight times, impact
/// parameters and velocities (w[0] is the first segment's velocity).
/// `exit` is the velocity after the final collision.
struct Pack {
  std::size_t gamma = 0;
  std::vector<double> xi;
  std::vector<ImpactParameter> beta;
  std::vector<Velocity> w;
  Velocity exit{};

  double theta() const;
  friend bool operator==(const Pack&, const Pack&) = default;
};

/// Virtual collision preceding a concatenation: pre-initial velocity and
/// the impact parameter of the time-0 collision.
struct VirtualCollision {
  Velocity u0{};
  ImpactParameter beta0{};
};

struct ConcatenationIndex {
  std::vector<std::size_t> Gamma;  // Gamma[0] = 0
  std::vector<double> Theta;       // Theta[0] = 0
  std::vector<Vec3> Xi;            // Xi[0] = 0
};

struct Concatenation {
  ConcatenationIndex index;
  FlightPath path;
};

FlightPath sample_flight(const VelocitySet& set, const Velocity& v0, double horizon, double r, Rng& rng);

// Same draws as sample_flight(...).endpoint() without storing the path.
Vec3 sample_flight_endpoint(const VelocitySet& set, const Velocity& v0, double horizon, double r, Rng& rng);

// Flight stopped at exactly `count` collisions (horizon = tau[count]).
FlightPath sample_flight_collisions(const VelocitySet& set, const Velocity& v0, std::size_t count,
                                    double r, Rng& rng);

VirtualCollision sample_virtual_collision(const VelocitySet& set, const Velocity& v0, double r, Rng& rng);

Signature signature_of(const FlightPath& path);

Pack sample_excursion_pack(const VelocitySet& set, const Velocity& v0, double r, Rng& rng);
Pack sample_leg_pack(const VelocitySet& set, const Velocity& v0, double r, Rng& rng);

// Leg stopping rule applied to a flight-time/velocity stream with
// lookahead: smallest i in {2} u {5,6,...} with xi[i-1], xi[i], xi[i+1],
// xi[i+2] > 1 and w[i+1] = v0 (1-based indices as in the leg definition).
bool leg_stop_allowed(std::size_t i);

Pack reverse_pack(const Pack& pack);

// End point sum_i xi_i w_i of the pack's own path.
Vec3 pack_endpoint(const Pack& pack);

// Path of a single pack started at the origin.
FlightPath pack_path(const Pack& pack, const VirtualCollision& initial, double r);

Concatenation concatenate(std::span<const Pack> packs, const Velocity& v0,
                          const VirtualCollision& initial, double r);

/// Backward process Z*(t) = Z(theta - t, reversed) - endpoint(reversed),
/// evaluated at the reversed pack's breakpoints.
std::vector<Vec3> backward_leg_points(const Pack& pack);

}  // namespace windtree
