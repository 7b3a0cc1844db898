#pragma once

#include <optional>
#include <vector>

#include "windtree/geometry.hpp"

namespace windtree {

struct TrajectoryNode {
  double t = 0.0;
  Vec3 pos{};
  Velocity vel{};  // velocity on [t, next node)
};

/// Straight piece origin + (s - t0) dir for s in [t0, t1].
struct PathPiece {
  Vec3 origin{};
  Vec3 dir{};
  double t0 = 0.0;
  double t1 = 0.0;
};

/// Right-continuous piecewise-linear path given by its breakpoints.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(const Vec3& start, const Velocity& v, double t0 = 0.0);

  // Adds a breakpoint; t must not precede the last node.
  void append(double t, const Vec3& pos, const Velocity& vel_after);
  void set_end(double t_end) { end_ = t_end; }

  double start_time() const { return nodes_.front().t; }
  double end_time() const { return end_; }
  const std::vector<TrajectoryNode>& nodes() const { return nodes_; }
  bool empty() const { return nodes_.empty(); }

  // Index of the last node with node.t <= t.
  std::size_t node_index(double t) const;
  Vec3 position_at(double t) const;
  Velocity velocity_at(double t) const;

  // Pieces restricted to [from, to]; zero-length pieces are dropped.
  std::vector<PathPiece> pieces(double from, double to) const;
  std::vector<PathPiece> pieces() const { return pieces(start_time(), end_time()); }

 private:
  std::vector<TrajectoryNode> nodes_;
  double end_ = 0.0;
};

/// Earliest node time at which the two paths stop being bitwise equal in
/// position or velocity, or nullopt if they agree on [0, until].
std::optional<double> first_divergence(const Trajectory& a, const Trajectory& b, double until);

double sup_distance(const Trajectory& a, const Trajectory& b, double until);

}  // namespace windtree
