#pragma once

#include <cstdint>
#include <vector>

#include "windtree/flight.hpp"

namespace windtree {

/// Balls of radius `radius` centered on the lattice spacing * z, z in
/// [-extent, extent]^3.
struct BallGrid {
  double spacing = 0.0;
  double radius = 0.0;
  int extent = 0;

  std::size_t size() const;
  std::size_t index(int i, int j, int k) const;
  Vec3 center(std::size_t idx) const;
};

BallGrid default_grid(double r, double max_distance);

// Length of {s in [0, length] : |origin + s dir - center| < radius} for a
// unit direction.
double segment_ball_chord(const Vec3& origin, const Vec3& dir, double length, const Vec3& center,
                          double radius);

/// Empirical occupation measures on a ball grid. g and h are per excursion
/// (collision points and time before the first return); G and H accumulate
/// over a run of several excursions started with the same first one.
struct OccupationHistogram {
  BallGrid grid;
  std::size_t runs = 0;
  std::size_t excursions_per_run = 0;
  std::vector<double> g, h, G, H;  // means over runs
  double mean_theta = 0.0;         // E[theta_1]
  double theta_se = 0.0;
  double mean_h_total = 0.0;       // time in all of space during the first excursion
  double mean_horizon = 0.0;       // E[Theta_M]
};

OccupationHistogram occupation_estimate(const VelocitySet& set, const Velocity& v0, double r,
                                        const BallGrid& grid, std::size_t runs,
                                        std::size_t excursions_per_run, std::uint64_t seed,
                                        unsigned threads = 1);

// Mean g-mass of balls binned by center distance: bin b covers
// [lo + b w, lo + (b + 1) w).
std::vector<double> radial_profile(const OccupationHistogram& hist, const std::vector<double>& values,
                                   double lo, double hi, std::size_t bins);

}  // namespace windtree
