#include "windtree/environment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <fmt/format.h>

#include "windtree/errors.hpp"
#include "windtree/flight.hpp"

namespace windtree {

IntensityCalibration calibrate_intensity(const ProbabilityVector& p, double r) {
  if (!(r > 0.0)) throw DomainError("cube side must be positive");
  return {p.norm() / (r * r), 1.0 / (p.norm() * r * r)};
}

double intensity_for(const ProbabilityVector& p, double r, IntensityMode mode) {
  const auto cal = calibrate_intensity(p, r);
  return mode == IntensityMode::calibrated ? cal.calibrated : cal.nominal;
}

std::string ScattererId::str() const {
  if (initial) return "init";
  return fmt::format("{}:{}:{}:{}", cell[0], cell[1], cell[2], index);
}

PoissonEnvironment::PoissonEnvironment(double intensity, double r, std::uint64_t seed, double cell_size)
    : intensity_(intensity), r_(r), seed_(seed), cell_(cell_size > 0.0 ? cell_size : std::max(4.0 * r, 1.0)) {
  if (!(intensity > 0.0)) throw ValidationError("intensity must be positive");
  if (!(r > 0.0)) throw ValidationError("cube side must be positive");
  if (cell_ < 4.0 * r) throw ValidationError("cell size must be at least 4r");
}

std::vector<CubeObstacle> PoissonEnvironment::scatterers_in_cell(const CellCoord& cell) const {
  Rng rng = Rng::derive(seed_, {0xce11ULL, static_cast<std::uint64_t>(cell[0]),
                                static_cast<std::uint64_t>(cell[1]), static_cast<std::uint64_t>(cell[2])});
  const std::uint64_t n = rng.poisson(intensity_ * cell_ * cell_ * cell_);
  std::vector<CubeObstacle> out;
  out.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    Vec3 c;
    for (std::size_t a = 0; a < 3; ++a) c[a] = (static_cast<double>(cell[a]) + rng.uniform()) * cell_;
    out.push_back({c, half_side()});
  }
  return out;
}

CellCoord PoissonEnvironment::cell_of(const Vec3& x) const {
  return {static_cast<std::int64_t>(std::floor(x[0] / cell_)), static_cast<std::int64_t>(std::floor(x[1] / cell_)),
          static_cast<std::int64_t>(std::floor(x[2] / cell_))};
}

bool PoissonEnvironment::origin_covered() const {
  const CellCoord base = cell_of(Vec3{});
  for (std::int64_t dx = -1; dx <= 1; ++dx)
    for (std::int64_t dy = -1; dy <= 1; ++dy)
      for (std::int64_t dz = -1; dz <= 1; ++dz) {
        for (const auto& cube : scatterers_in_cell({base[0] + dx, base[1] + dy, base[2] + dz})) {
          if (in_open_cube(Vec3{}, cube, 0.0)) return true;
        }
      }
  return false;
}

Trajectory DirectTrajectory::trajectory() const {
  Trajectory traj(Vec3{}, v0, 0.0);
  for (const auto& e : events) traj.append(e.t, e.position, e.velocity_after);
  traj.set_end(horizon);
  return traj;
}

namespace {

class CellWalker {
 public:
  explicit CellWalker(const PoissonEnvironment& env) : env_(env) {}

  struct Hit {
    RayHit ray;
    ScattererId id;
    Vec3 center;
  };

  // Earliest cube entry along pos + t v with t <= limit.
  std::optional<Hit> first_hit(const Vec3& pos, const Velocity& v, double limit) {
    std::optional<Hit> best;
    auto consider = [&](const CubeObstacle& cube, const ScattererId& id) {
      const auto hit = ray_cube_entry(pos, v, cube);
      if (!hit) return;
      if (!best || hit->t < best->ray.t ||
          (hit->t == best->ray.t &&
           std::lexicographical_compare(cube.center.c.begin(), cube.center.c.end(), best->center.c.begin(),
                                        best->center.c.end()))) {
        best = Hit{*hit, id, cube.center};
      }
    };
    if (const auto& init = env_.initial_scatterer()) consider(*init, ScattererId{{}, 0, true});

    const double L = env_.cell_size();
    CellCoord cell = env_.cell_of(pos);
    std::array<double, 3> t_max{};
    std::array<double, 3> t_delta{};
    std::array<int, 3> step{};
    for (std::size_t a = 0; a < 3; ++a) {
      step[a] = v[static_cast<int>(a)] > 0.0 ? 1 : -1;
      const double boundary = (static_cast<double>(cell[a]) + (step[a] > 0 ? 1.0 : 0.0)) * L;
      t_max[a] = (boundary - pos[a]) / v[static_cast<int>(a)];
      t_delta[a] = L / std::fabs(v[static_cast<int>(a)]);
    }
    checked_.clear();
    for (;;) {
      for (std::int64_t dx = -1; dx <= 1; ++dx)
        for (std::int64_t dy = -1; dy <= 1; ++dy)
          for (std::int64_t dz = -1; dz <= 1; ++dz) {
            const CellCoord c{cell[0] + dx, cell[1] + dy, cell[2] + dz};
            if (std::find(checked_.begin(), checked_.end(), c) != checked_.end()) continue;
            checked_.push_back(c);
            const auto& cubes = cubes_of(c);
            for (std::size_t i = 0; i < cubes.size(); ++i) {
              consider(cubes[i], ScattererId{c, static_cast<std::uint32_t>(i), false});
            }
          }
      const std::size_t a = static_cast<std::size_t>(
          std::min_element(t_max.begin(), t_max.end()) - t_max.begin());
      const double cell_exit = t_max[a];
      if (best && best->ray.t <= cell_exit) break;
      if (cell_exit >= limit) break;
      cell[a] += step[a];
      t_max[a] += t_delta[a];
    }
    if (best && best->ray.t > limit) best.reset();
    return best;
  }

 private:
  const std::vector<CubeObstacle>& cubes_of(const CellCoord& c) {
    auto it = cache_.find(c);
    if (it == cache_.end()) it = cache_.emplace(c, env_.scatterers_in_cell(c)).first;
    return it->second;
  }

  const PoissonEnvironment& env_;
  std::map<CellCoord, std::vector<CubeObstacle>> cache_;
  std::vector<CellCoord> checked_;
};

}  // namespace

std::optional<DirectTrajectory> simulate_direct(const PoissonEnvironment& env, const Velocity& v0,
                                                double horizon) {
  if (!(horizon >= 0.0)) throw DomainError("negative horizon");
  if (env.origin_covered()) return std::nullopt;
  DirectTrajectory out;
  out.v0 = v0;
  out.horizon = horizon;
  CellWalker walker(env);
  Vec3 pos{};
  Velocity vel = v0;
  double t = 0.0;
  for (;;) {
    const double remaining = horizon - t;
    const auto hit = walker.first_hit(pos, vel, remaining);
    if (!hit) {
      out.end = advance(pos, vel.vec(), remaining);
      return out;
    }
    if (out.events.size() >= kMaxEvents) throw RunawayError("direct simulation exceeded the event guard");
    pos = advance(pos, vel.vec(), hit->ray.t);
    t += hit->ray.t;
    vel = vel.reflected(hit->ray.face.axis);
    if (hit->ray.tie) ++out.ties;
    out.events.push_back({t, pos, vel, hit->ray.face, hit->id});
  }
}

PoissonEnvironment make_environment(const VelocitySet& set, const Velocity& v0, double r,
                                    IntensityMode mode, std::uint64_t seed, bool initial_scatterer) {
  PoissonEnvironment env(intensity_for(set.p(), r, mode), r, seed);
  if (initial_scatterer) {
    Rng rng = Rng::derive(seed, {0x1417ULL});
    const VirtualCollision vc = sample_virtual_collision(set, v0, r, rng);
    env.set_initial_scatterer({vc.beta0.offset, 0.5 * r});
  }
  return env;
}

}  // namespace windtree
