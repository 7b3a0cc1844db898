#include <algorithm>

#include "windtree/coupling.hpp"
#include "windtree/errors.hpp"

namespace windtree {

LegSplit split_legs(const CoupledTriple& triple) {
  const auto& att = triple.Z.attempts;
  const std::size_t M = att.size();
  // xi(n) = tau_n - tau_{n-1} over Z's attempt times, tau_0 = 0.
  auto tau = [&](std::size_t n) { return n == 0 ? 0.0 : att[n - 1].t; };
  auto xi = [&](std::size_t n) { return tau(n) - tau(n - 1); };
  // Attempted velocity after attempt n.
  auto w_after = [&](std::size_t n) { return att[n - 1].w; };

  LegSplit out;
  out.Gamma.push_back(0);
  out.Theta.push_back(0.0);
  std::size_t b = 0;
  for (;;) {
    std::size_t stop = kNone;
    for (std::size_t i = 2; b + i + 2 <= M; ++i) {
      if (!leg_stop_allowed(i)) continue;
      const std::size_t g = b + i;
      if (xi(g - 1) > 1.0 && xi(g) > 1.0 && xi(g + 1) > 1.0 && xi(g + 2) > 1.0 && w_after(g) == triple.v0) {
        stop = g;
        break;
      }
    }
    if (stop == kNone) break;
    out.Gamma.push_back(stop);
    out.Theta.push_back(tau(stop));
    b = stop;
  }
  if (out.Theta.back() < triple.horizon) {
    out.Gamma.push_back(M);
    out.Theta.push_back(triple.horizon);
    out.partial_tail = true;
  }
  return out;
}

double StoppingIndices::guaranteed_agreement(double horizon) const {
  const std::size_t m = min_index();
  if (m == kNone) return horizon;
  return legs.Theta[m - 1];
}

namespace {

bool same_point(const Vec3& a, const Vec3& b) { return max_abs(a - b) <= 1e-9; }

// Replays the exploration rules on one leg of Z, seeded with the leg's
// boundary scatterer only, and reports whether the result differs from Z.
bool leg_disagrees(const CoupledTriple& triple, std::size_t g0, std::size_t g1, double t0, double t1) {
  const auto& z = triple.Z;
  const std::optional<Vec3> boundary = z.scatterers[g0];
  ExplorationState replay(triple.r, z.path.position_at(t0), t0, z.path.velocity_at(t0), boundary);
  for (std::size_t m = g0 + 1; m <= g1 && m <= z.attempts.size(); ++m) {
    const AttemptRecord& rec = z.attempts[m - 1];
    if (rec.t > t1) break;
    replay.fly_to(rec.t);
    if (!(replay.velocity() == rec.before) || !same_point(replay.position(), z.path.position_at(rec.t))) {
      return true;
    }
    AttemptRecord copy = rec;
    const auto outcome = replay.attempt_fresh_collision(copy);
    if (outcome.accepted != rec.accepted) return true;
  }
  replay.fly_to(t1);
  return !(replay.velocity() == z.path.velocity_at(t1)) || !same_point(replay.position(), z.path.position_at(t1));
}

}  // namespace

StoppingIndices stopping_indices(const CoupledTriple& triple) {
  StoppingIndices out;
  out.legs = split_legs(triple);
  const auto& z = triple.Z;
  const std::size_t n_legs = out.legs.Gamma.size() - 1;
  for (std::size_t n = 1; n <= n_legs; ++n) {
    const std::size_t g0 = out.legs.Gamma[n - 1];
    const std::size_t g1 = out.legs.Gamma[n];
    const double t0 = out.legs.Theta[n - 1];
    const double t1 = out.legs.Theta[n];

    const bool intra = leg_disagrees(triple, g0, g1, t0, t1);
    const auto past = z.path.pieces(0.0, t0);
    const auto leg = z.path.pieces(t0, t1);
    const auto past_cubes = cubes_of(z.scatterers, triple.r, 0, g0);
    const auto leg_cubes = cubes_of(z.scatterers, triple.r, g0 + 1, g1 + 1);
    const bool inter = !r_compatible(past, past_cubes, leg, leg_cubes);

    out.intra_flags.push_back(intra);
    out.inter_flags.push_back(inter);
    if (intra && out.rho == kNone) out.rho = n;
    if (inter && out.sigma == kNone) out.sigma = n;
  }
  return out;
}

}  // namespace windtree
