#include "windtree/geometry.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>

#include "windtree/errors.hpp"

namespace windtree {

ProbabilityVector::ProbabilityVector(double p1, double p2, double p3) : p_{p1, p2, p3} {
  for (double x : p_) {
    if (!(x > 0.0) || !std::isfinite(x)) {
      throw ValidationError("probability vector entries must be positive and finite");
    }
  }
  if (std::fabs(p1 + p2 + p3 - 1.0) > 1e-12) {
    throw ValidationError("probability vector must sum to 1");
  }
  norm_ = std::sqrt(p1 * p1 + p2 * p2 + p3 * p3);
}

Velocity::Velocity(const ProbabilityVector& p, std::uint8_t sign_bits) : bits_(sign_bits & 7U) {
  for (int i = 0; i < 3; ++i) {
    const double mag = p[i] / p.norm();
    v_[static_cast<std::size_t>(i)] = ((bits_ >> i) & 1U) ? -mag : mag;
  }
}

Velocity Velocity::reflected(int axis) const {
  if (axis < 0 || axis > 2) throw DomainError("axis out of range");
  Velocity out = *this;
  out.bits_ = static_cast<std::uint8_t>(bits_ ^ (1U << axis));
  out.v_[static_cast<std::size_t>(axis)] = -v_[static_cast<std::size_t>(axis)];
  return out;
}

VelocitySet::VelocitySet(const ProbabilityVector& p) : p_(p) {
  for (std::uint8_t b = 0; b < 8; ++b) all_[b] = Velocity(p, b);
}

VelocitySet build_velocity_set(const ProbabilityVector& p) { return VelocitySet(p); }

Velocity reflect(const Velocity& v, int axis) { return v.reflected(axis); }

std::array<Velocity, 3> accessible(const Velocity& v) {
  return {v.reflected(0), v.reflected(1), v.reflected(2)};
}

std::optional<int> flipped_axis(const Velocity& v, const Velocity& w) {
  const unsigned diff = static_cast<unsigned>(v.sign_bits() ^ w.sign_bits());
  if (std::popcount(diff) != 1) return std::nullopt;
  return std::countr_zero(diff);
}

bool same_parity(const Velocity& v, const Velocity& w) {
  return std::popcount(static_cast<unsigned>(v.sign_bits() ^ w.sign_bits())) % 2 == 0;
}

int sample_flip_axis(const ProbabilityVector& p, Rng& rng) {
  const double u = rng.uniform();
  if (u < p[0]) return 0;
  if (u < p[0] + p[1]) return 1;
  return 2;
}

Velocity transition_sample(const VelocitySet& set, const Velocity& v, Rng& rng) {
  return v.reflected(sample_flip_axis(set.p(), rng));
}

Face collision_face(const Velocity& v, const Velocity& w) {
  const auto k = flipped_axis(v, w);
  if (!k) throw DomainError("velocity is not reachable by a single reflection");
  return Face{*k, -v.sign(*k)};
}

ImpactParameter sample_impact(const Velocity& v, const Velocity& w, double r, Rng& rng) {
  const Face f = collision_face(v, w);
  const double h = 0.5 * r;
  ImpactParameter beta;
  for (int i = 0; i < 3; ++i) {
    if (i == f.axis) {
      beta.offset[static_cast<std::size_t>(i)] = -f.side * h;
    } else {
      beta.offset[static_cast<std::size_t>(i)] = rng.uniform(-h, h);
    }
  }
  return beta;
}

bool in_open_cube(const Vec3& point, const CubeObstacle& cube, double tol) {
  const double h = cube.half_side - tol;
  for (std::size_t i = 0; i < 3; ++i) {
    if (!(std::fabs(point[i] - cube.center[i]) < h)) return false;
  }
  return true;
}

std::optional<RayHit> ray_cube_entry(const Vec3& origin, const Vec3& v, const CubeObstacle& cube) {
  if (in_open_cube(origin, cube)) throw DomainError("ray origin inside an open cube");
  double t_enter = -std::numeric_limits<double>::infinity();
  double t_exit = std::numeric_limits<double>::infinity();
  std::array<double, 3> near{};
  for (std::size_t i = 0; i < 3; ++i) {
    const double lo = cube.center[i] - cube.half_side;
    const double hi = cube.center[i] + cube.half_side;
    if (v[i] == 0.0) {
      if (!(origin[i] > lo && origin[i] < hi)) return std::nullopt;
      near[i] = -std::numeric_limits<double>::infinity();
      continue;
    }
    double a = (lo - origin[i]) / v[i];
    double b = (hi - origin[i]) / v[i];
    if (a > b) std::swap(a, b);
    near[i] = a;
    t_enter = std::max(t_enter, a);
    t_exit = std::min(t_exit, b);
  }
  if (!(t_enter < t_exit) || !(t_enter > kGeomTol)) return std::nullopt;
  RayHit hit;
  hit.t = t_enter;
  int axis = -1;
  const double tie_tol = kGeomTol * std::max(1.0, std::fabs(t_enter));
  for (int i = 0; i < 3; ++i) {
    if (std::fabs(near[static_cast<std::size_t>(i)] - t_enter) <= tie_tol) {
      if (axis < 0) {
        axis = i;
      } else {
        hit.tie = true;
      }
    }
  }
  hit.face.axis = axis;
  hit.face.side = v[static_cast<std::size_t>(axis)] > 0.0 ? -1 : 1;
  return hit;
}

std::optional<RayHit> ray_cube_entry(const Vec3& origin, const Velocity& v, const CubeObstacle& cube) {
  return ray_cube_entry(origin, v.vec(), cube);
}

std::optional<std::pair<double, double>> segment_open_cube_overlap(
    const Vec3& origin, const Vec3& dir, double length, const CubeObstacle& cube, double tol) {
  double lo = 0.0;
  double hi = length;
  const double h = cube.half_side - tol;
  if (!(h > 0.0)) return std::nullopt;
  for (std::size_t i = 0; i < 3; ++i) {
    const double rel = origin[i] - cube.center[i];
    if (dir[i] == 0.0) {
      if (!(std::fabs(rel) < h)) return std::nullopt;
      continue;
    }
    double a = (-h - rel) / dir[i];
    double b = (h - rel) / dir[i];
    if (a > b) std::swap(a, b);
    lo = std::max(lo, a);
    hi = std::min(hi, b);
    if (!(lo < hi)) return std::nullopt;
  }
  return std::make_pair(lo, hi);
}

namespace {
bool center_less(const Vec3& a, const Vec3& b) {
  return std::lexicographical_compare(a.c.begin(), a.c.end(), b.c.begin(), b.c.end());
}
}  // namespace

FlightSegmentList mechanical_flight(const Vec3& start, const Velocity& v,
                                    std::span<const CubeObstacle> scatterers, double duration) {
  if (duration < 0.0) throw DomainError("negative flight duration");
  FlightSegmentList out;
  out.start = start;
  out.start_velocity = v;
  out.duration = duration;
  Vec3 pos = start;
  Velocity vel = v;
  double elapsed = 0.0;
  for (;;) {
    std::optional<RayHit> best;
    std::size_t best_index = 0;
    for (std::size_t k = 0; k < scatterers.size(); ++k) {
      const auto hit = ray_cube_entry(pos, vel, scatterers[k]);
      if (!hit) continue;
      if (!best || hit->t < best->t ||
          (hit->t == best->t && center_less(scatterers[k].center, scatterers[best_index].center))) {
        best = hit;
        best_index = k;
      }
    }
    const double remaining = duration - elapsed;
    if (!best || best->t > remaining) {
      out.end = advance(pos, vel.vec(), remaining);
      out.end_velocity = vel;
      return out;
    }
    if (out.events.size() >= kMaxEvents) {
      throw RunawayError("mechanical flight exceeded " + std::to_string(kMaxEvents) + " events");
    }
    pos = advance(pos, vel.vec(), best->t);
    elapsed += best->t;
    vel = vel.reflected(best->face.axis);
    if (best->tie) ++out.ties;
    out.events.push_back(CollisionEvent{elapsed, pos, best->face, best_index, vel, best->tie});
  }
}

}  // namespace windtree
