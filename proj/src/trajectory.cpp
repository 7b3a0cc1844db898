#include "windtree/trajectory.hpp"

#include <algorithm>

#include "windtree/errors.hpp"

namespace windtree {

Trajectory::Trajectory(const Vec3& start, const Velocity& v, double t0) : end_(t0) {
  nodes_.push_back({t0, start, v});
}

void Trajectory::append(double t, const Vec3& pos, const Velocity& vel_after) {
  if (!nodes_.empty() && t < nodes_.back().t) throw ConstructionError("trajectory nodes out of order");
  nodes_.push_back({t, pos, vel_after});
  end_ = std::max(end_, t);
}

std::size_t Trajectory::node_index(double t) const {
  if (nodes_.empty()) throw DomainError("empty trajectory");
  auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t,
                             [](double x, const TrajectoryNode& n) { return x < n.t; });
  if (it == nodes_.begin()) throw DomainError("time precedes the trajectory start");
  return static_cast<std::size_t>(std::distance(nodes_.begin(), it)) - 1;
}

Vec3 Trajectory::position_at(double t) const {
  if (t < start_time() || t > end_) throw DomainError("time outside the trajectory range");
  const auto& n = nodes_[node_index(t)];
  return advance(n.pos, n.vel.vec(), t - n.t);
}

Velocity Trajectory::velocity_at(double t) const { return nodes_[node_index(t)].vel; }

std::vector<PathPiece> Trajectory::pieces(double from, double to) const {
  std::vector<PathPiece> out;
  if (nodes_.empty() || !(to > from)) return out;
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    const double a = nodes_[k].t;
    const double b = k + 1 < nodes_.size() ? nodes_[k + 1].t : end_;
    const double lo = std::max(a, from);
    const double hi = std::min(b, to);
    if (!(hi > lo)) continue;
    out.push_back({advance(nodes_[k].pos, nodes_[k].vel.vec(), lo - a), nodes_[k].vel.vec(), lo, hi});
  }
  return out;
}

std::optional<double> first_divergence(const Trajectory& a, const Trajectory& b, double until) {
  std::vector<double> times;
  for (const auto& n : a.nodes()) if (n.t <= until) times.push_back(n.t);
  for (const auto& n : b.nodes()) if (n.t <= until) times.push_back(n.t);
  std::sort(times.begin(), times.end());
  for (double t : times) {
    if (!(a.position_at(t) == b.position_at(t)) || !(a.velocity_at(t) == b.velocity_at(t))) return t;
  }
  if (!(a.position_at(until) == b.position_at(until))) return until;
  return std::nullopt;
}

double sup_distance(const Trajectory& a, const Trajectory& b, double until) {
  // Both paths are piecewise linear, so the distance is maximized at a
  // breakpoint of either path.
  double best = 0.0;
  auto visit = [&](double t) {
    if (t <= until) best = std::max(best, norm(a.position_at(t) - b.position_at(t)));
  };
  for (const auto& n : a.nodes()) visit(n.t);
  for (const auto& n : b.nodes()) visit(n.t);
  visit(until);
  return best;
}

}  // namespace windtree
