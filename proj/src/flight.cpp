#include "windtree/flight.hpp"

#include <algorithm>
#include <numeric>

#include "windtree/errors.hpp"

namespace windtree {

Vec3 FlightPath::position_at(double t) const {
  if (!(t >= 0.0 && t <= horizon)) throw DomainError("time outside the flight horizon");
  const auto it = std::upper_bound(tau.begin(), tau.end(), t);
  const auto k = static_cast<std::size_t>(std::distance(tau.begin(), it)) - 1;
  return advance(Y[k], u[k + 1].vec(), t - tau[k]);
}

Velocity FlightPath::velocity_at(double t) const {
  const auto it = std::upper_bound(tau.begin(), tau.end(), t);
  const auto k = static_cast<std::size_t>(std::distance(tau.begin(), it)) - 1;
  return u[k + 1];
}

Trajectory FlightPath::trajectory() const {
  Trajectory traj(Y[0], u[1], tau[0]);
  for (std::size_t k = 1; k < tau.size(); ++k) traj.append(tau[k], Y[k], u[k + 1]);
  traj.set_end(horizon);
  return traj;
}

double Pack::theta() const {
  double s = 0.0;
  for (double x : xi) s += x;
  return s;
}

VirtualCollision sample_virtual_collision(const VelocitySet& set, const Velocity& v0, double r, Rng& rng) {
  VirtualCollision vc;
  vc.u0 = v0.reflected(sample_flip_axis(set.p(), rng));
  vc.beta0 = sample_impact(vc.u0, v0, r, rng);
  return vc;
}

namespace {

FlightPath start_path(const Velocity& v0, const VirtualCollision& vc, double r) {
  FlightPath path;
  path.r = r;
  path.tau.push_back(0.0);
  path.Y.push_back(Vec3{});
  path.u.push_back(vc.u0);
  path.u.push_back(v0);
  path.beta.push_back(vc.beta0);
  path.yprime.push_back(path.Y[0] + vc.beta0.offset);
  return path;
}

void push_collision(FlightPath& path, const VelocitySet& set, double t, Rng& rng) {
  const double prev = path.tau.back();
  path.tau.push_back(t);
  path.Y.push_back(advance(path.Y.back(), path.u.back().vec(), t - prev));
  const Velocity before = path.u.back();
  const Velocity after = before.reflected(sample_flip_axis(set.p(), rng));
  path.u.push_back(after);
  path.beta.push_back(sample_impact(before, after, path.r, rng));
  path.yprime.push_back(path.Y.back() + path.beta.back().offset);
}

}  // namespace

FlightPath sample_flight(const VelocitySet& set, const Velocity& v0, double horizon, double r, Rng& rng) {
  if (!(horizon > 0.0)) throw DomainError("flight horizon must be positive");
  FlightPath path = start_path(v0, sample_virtual_collision(set, v0, r, rng), r);
  path.horizon = horizon;
  for (;;) {
    const double t = path.tau.back() + rng.exponential();
    if (t > horizon) break;
    push_collision(path, set, t, rng);
  }
  return path;
}

Vec3 sample_flight_endpoint(const VelocitySet& set, const Velocity& v0, double horizon, double r, Rng& rng) {
  if (!(horizon > 0.0)) throw DomainError("flight horizon must be positive");
  (void)sample_virtual_collision(set, v0, r, rng);
  Vec3 pos{};
  Velocity u = v0;
  double tau = 0.0;
  for (;;) {
    const double t = tau + rng.exponential();
    if (t > horizon) break;
    pos = advance(pos, u.vec(), t - tau);
    tau = t;
    const Velocity after = u.reflected(sample_flip_axis(set.p(), rng));
    (void)sample_impact(u, after, r, rng);
    u = after;
  }
  return advance(pos, u.vec(), horizon - tau);
}

FlightPath sample_flight_collisions(const VelocitySet& set, const Velocity& v0, std::size_t count,
                                    double r, Rng& rng) {
  FlightPath path = start_path(v0, sample_virtual_collision(set, v0, r, rng), r);
  for (std::size_t k = 0; k < count; ++k) push_collision(path, set, path.tau.back() + rng.exponential(), rng);
  path.horizon = path.tau.back();
  return path;
}

Signature signature_of(const FlightPath& path) {
  Signature s;
  s.eps.reserve(path.collisions());
  for (std::size_t k = 1; k <= path.collisions(); ++k) s.eps.push_back(path.xi(k) < 1.0 ? 1 : 0);
  return s;
}

namespace {

struct Step {
  double xi;
  Velocity next;  // w_{k+1}
  ImpactParameter beta;
};

Step draw_step(const VelocitySet& set, const Velocity& w, double xi, double r, Rng& rng) {
  Step s{xi, w.reflected(sample_flip_axis(set.p(), rng)), {}};
  s.beta = sample_impact(w, s.next, r, rng);
  return s;
}

}  // namespace

Pack sample_excursion_pack(const VelocitySet& set, const Velocity& v0, double r, Rng& rng) {
  Pack pack;
  Velocity w = v0;
  for (std::size_t i = 1;; ++i) {
    if (i > kMaxPackLength) throw RunawayError("excursion pack exceeded the length guard");
    const Step s = draw_step(set, w, rng.exponential(), r, rng);
    pack.xi.push_back(s.xi);
    pack.w.push_back(w);
    pack.beta.push_back(s.beta);
    w = s.next;
    if (i > 1 && w == v0) {
      pack.gamma = i;
      pack.exit = v0;
      return pack;
    }
  }
}

bool leg_stop_allowed(std::size_t i) { return i == 2 || i >= 5; }

Pack sample_leg_pack(const VelocitySet& set, const Velocity& v0, double r, Rng& rng) {
  // steps[k-1] holds (xi_k, w_{k+1}, beta_k); velocities[k-1] holds w_k.
  std::vector<Step> steps;
  std::vector<Velocity> velocities{v0};
  auto ensure = [&](std::size_t k) {
    while (steps.size() < k) {
      const std::size_t idx = steps.size() + 1;
      const double xi = idx <= 2 ? rng.exponential_above_one() : rng.exponential();
      steps.push_back(draw_step(set, velocities.back(), xi, r, rng));
      velocities.push_back(steps.back().next);
    }
  };
  for (std::size_t i = 2;; ++i) {
    if (i > kMaxPackLength) throw RunawayError("leg pack exceeded the length guard");
    if (!leg_stop_allowed(i)) continue;
    ensure(i + 2);
    const bool long_ends = steps[i - 2].xi > 1.0 && steps[i - 1].xi > 1.0 && steps[i].xi > 1.0 &&
                           steps[i + 1].xi > 1.0;
    if (long_ends && velocities[i] == v0) {
      Pack pack;
      pack.gamma = i;
      for (std::size_t k = 0; k < i; ++k) {
        pack.xi.push_back(steps[k].xi);
        pack.beta.push_back(steps[k].beta);
        pack.w.push_back(velocities[k]);
      }
      pack.exit = v0;
      return pack;
    }
  }
}

Pack reverse_pack(const Pack& pack) {
  Pack out = pack;
  std::reverse(out.xi.begin(), out.xi.end());
  std::reverse(out.beta.begin(), out.beta.end());
  std::reverse(out.w.begin(), out.w.end());
  return out;
}

Vec3 pack_endpoint(const Pack& pack) {
  Vec3 pos{};
  for (std::size_t i = 0; i < pack.gamma; ++i) pos = advance(pos, pack.w[i].vec(), pack.xi[i]);
  return pos;
}

namespace {

// Appends one pack's collisions to `path`, offset by (time0, base).
void append_pack(FlightPath& path, const Pack& pack, double time0, const Vec3& base, double theta) {
  double partial = 0.0;
  Vec3 local{};
  for (std::size_t i = 0; i < pack.gamma; ++i) {
    partial += pack.xi[i];
    local = advance(local, pack.w[i].vec(), pack.xi[i]);
    const double t = i + 1 == pack.gamma ? time0 + theta : time0 + partial;
    path.tau.push_back(t);
    path.Y.push_back(base + local);
    path.u.back() = pack.w[i];
    path.u.push_back(i + 1 < pack.gamma ? pack.w[i + 1] : pack.exit);
    path.beta.push_back(pack.beta[i]);
    path.yprime.push_back(path.Y.back() + pack.beta[i].offset);
  }
}

}  // namespace

FlightPath pack_path(const Pack& pack, const VirtualCollision& initial, double r) {
  FlightPath path = start_path(pack.w.empty() ? pack.exit : pack.w.front(), initial, r);
  const double theta = pack.theta();
  append_pack(path, pack, 0.0, Vec3{}, theta);
  path.horizon = theta;
  return path;
}

Concatenation concatenate(std::span<const Pack> packs, const Velocity& v0,
                          const VirtualCollision& initial, double r) {
  Concatenation out;
  out.path = start_path(v0, initial, r);
  auto& idx = out.index;
  idx.Gamma.push_back(0);
  idx.Theta.push_back(0.0);
  idx.Xi.push_back(Vec3{});
  for (const Pack& pack : packs) {
    const double theta = pack.theta();
    append_pack(out.path, pack, idx.Theta.back(), idx.Xi.back(), theta);
    idx.Gamma.push_back(idx.Gamma.back() + pack.gamma);
    idx.Theta.push_back(idx.Theta.back() + theta);
    idx.Xi.push_back(idx.Xi.back() + pack_endpoint(pack));
  }
  out.path.horizon = idx.Theta.back();
  return out;
}

std::vector<Vec3> backward_leg_points(const Pack& pack) {
  const Pack rev = reverse_pack(pack);
  const Vec3 end = pack_endpoint(rev);
  // Breakpoints of the reversed path at times s_k; Z* is evaluated at theta - s_k.
  std::vector<Vec3> pts;
  Vec3 pos{};
  std::vector<Vec3> forward{pos};
  for (std::size_t i = 0; i < rev.gamma; ++i) {
    pos = advance(pos, rev.w[i].vec(), rev.xi[i]);
    forward.push_back(pos);
  }
  for (auto it = forward.rbegin(); it != forward.rend(); ++it) pts.push_back(*it - end);
  return pts;
}

}  // namespace windtree
