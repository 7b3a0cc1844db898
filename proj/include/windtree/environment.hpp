#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "windtree/geometry.hpp"
#include "windtree/trajectory.hpp"

namespace windtree {

enum class IntensityMode { calibrated, nominal };

struct IntensityCalibration {
  double calibrated = 0.0;     // |p| / r^2, unit collision rate
  double nominal = 0.0;  // 1 / (|p| r^2)
};

IntensityCalibration calibrate_intensity(const ProbabilityVector& p, double r);
double intensity_for(const ProbabilityVector& p, double r, IntensityMode mode);

using CellCoord = std::array<std::int64_t, 3>;

struct ScattererId {
  CellCoord cell{};
  std::uint32_t index = 0;
  bool initial = false;  // the cube of the virtual collision at time 0

  std::string str() const;
  friend bool operator==(const ScattererId&, const ScattererId&) = default;
};

/// Poisson field of cubes realized lazily per cell. The cubes of a cell are
/// a pure function of (seed, cell).
class PoissonEnvironment {
 public:
  PoissonEnvironment(double intensity, double r, std::uint64_t seed, double cell_size = 0.0);

  double intensity() const { return intensity_; }
  double r() const { return r_; }
  double half_side() const { return 0.5 * r_; }
  double cell_size() const { return cell_; }
  std::uint64_t seed() const { return seed_; }

  std::vector<CubeObstacle> scatterers_in_cell(const CellCoord& cell) const;
  CellCoord cell_of(const Vec3& x) const;

  // Adds a cube outside the Poisson field (the time-0 scatterer).
  void set_initial_scatterer(const CubeObstacle& cube) { initial_ = cube; }
  const std::optional<CubeObstacle>& initial_scatterer() const { return initial_; }

  bool origin_covered() const;

 private:
  double intensity_;
  double r_;
  std::uint64_t seed_;
  double cell_;
  std::optional<CubeObstacle> initial_;
};

struct DirectEvent {
  double t = 0.0;
  Vec3 position{};
  Velocity velocity_after{};
  Face face{};
  ScattererId scatterer{};
};

struct DirectTrajectory {
  Velocity v0{};
  double horizon = 0.0;
  std::vector<DirectEvent> events;
  Vec3 end{};
  std::size_t ties = 0;

  Trajectory trajectory() const;
};

/// Event-driven flight from the origin. Returns nullopt when the origin is
/// covered by a cube (the caller resamples and records the rejection).
std::optional<DirectTrajectory> simulate_direct(const PoissonEnvironment& env, const Velocity& v0,
                                                double horizon);

/// Environment for replicate `seed` with the time-0 cube placed as a
/// virtual collision of the given lattice velocity (derived from the seed).
PoissonEnvironment make_environment(const VelocitySet& set, const Velocity& v0, double r,
                                    IntensityMode mode, std::uint64_t seed, bool initial_scatterer);

}  // namespace windtree
