#include <algorithm>

#include "windtree/coupling.hpp"
#include "windtree/errors.hpp"

namespace windtree {

std::vector<CubeObstacle> cubes_of(const std::vector<std::optional<Vec3>>& scatterers, double r,
                                   std::size_t from, std::size_t to) {
  std::vector<CubeObstacle> out;
  to = std::min(to, scatterers.size());
  for (std::size_t k = from; k < to; ++k) {
    if (scatterers[k]) out.push_back({*scatterers[k], 0.5 * r});
  }
  return out;
}

bool r_consistent(std::span<const PathPiece> pieces, std::span<const CubeObstacle> cubes) {
  for (const auto& piece : pieces) {
    for (const auto& cube : cubes) {
      if (segment_hits_open_cube(piece.origin, piece.dir, piece.t1 - piece.t0, cube)) return false;
    }
  }
  return true;
}

bool r_consistent(const Trajectory& path, const std::vector<std::optional<Vec3>>& scatterers, double r) {
  const auto pieces = path.pieces();
  const auto cubes = cubes_of(scatterers, r);
  return r_consistent(pieces, cubes);
}

namespace {
std::pair<double, double> time_span(std::span<const PathPiece> p) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& x : p) {
    lo = std::min(lo, x.t0);
    hi = std::max(hi, x.t1);
  }
  return {lo, hi};
}
}  // namespace

bool r_compatible(std::span<const PathPiece> a, std::span<const CubeObstacle> cubes_a,
                  std::span<const PathPiece> b, std::span<const CubeObstacle> cubes_b) {
  if (!a.empty() && !b.empty()) {
    const auto [a0, a1] = time_span(a);
    const auto [b0, b1] = time_span(b);
    if (a1 > b0 && b1 > a0) throw DomainError("r-compatibility needs disjoint time intervals");
  }
  return r_consistent(a, cubes_b) && r_consistent(b, cubes_a);
}

DirectMismatch detect_direct_mismatch(const MismatchWindow& w) {
  const double h = 0.5 * w.r;
  const Vec3 p0 = w.start;
  const Vec3 p1 = advance(p0, w.u[0].vec(), w.xi[0]);
  const Vec3 p2 = advance(p1, w.u[1].vec(), w.xi[1]);
  DirectMismatch out;
  out.eta_hat = segment_hits_open_cube(p0, w.u[0].vec(), w.xi[0], {p2 + w.beta[1].offset, h});
  out.eta_tilde = segment_hits_open_cube(p2, w.u[2].vec(), w.xi[2], {p1 + w.beta[0].offset, h});
  return out;
}

MismatchWindow mismatch_window(const FlightPath& path, std::size_t j) {
  if (j < 3 || j > path.collisions()) throw DomainError("mismatch window index out of range");
  MismatchWindow w;
  w.start = path.Y[j - 3];
  for (std::size_t m = 0; m < 3; ++m) {
    w.u[m] = path.u[j - 2 + m];
    w.xi[m] = path.xi(j - 2 + m);
  }
  w.beta = {path.beta[j - 2], path.beta[j - 1]};
  w.r = path.r;
  return w;
}

DirectMismatch detect_direct_mismatch(const FlightPath& path, std::size_t j) {
  return detect_direct_mismatch(mismatch_window(path, j));
}

IndirectMismatch detect_indirect_mismatch(const FlightPath& path, std::size_t j) {
  if (j <= 3 || j > path.collisions()) throw DomainError("indirect mismatch index out of range");
  IndirectMismatch out;
  const double h = 0.5 * path.r;
  const CubeObstacle target{path.yprime[j - 1], h};
  for (std::size_t m = 1; m + 3 <= j && !out.eta_hat; ++m) {
    out.eta_hat = segment_hits_open_cube(path.Y[m - 1], path.u[m].vec(), path.xi(m), target);
  }
  for (std::size_t k = 0; k + 3 <= j && !out.eta_tilde; ++k) {
    out.eta_tilde = segment_hits_open_cube(path.Y[j - 1], path.u[j].vec(), path.xi(j), {path.yprime[k], h});
  }
  return out;
}

}  // namespace windtree
