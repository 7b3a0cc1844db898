#include "windtree/occupation.hpp"

#include <algorithm>
#include <cmath>

#include "windtree/errors.hpp"
#include "windtree/parallel.hpp"

namespace windtree {

std::size_t BallGrid::size() const {
  const auto w = static_cast<std::size_t>(2 * extent + 1);
  return w * w * w;
}

std::size_t BallGrid::index(int i, int j, int k) const {
  const auto w = static_cast<std::size_t>(2 * extent + 1);
  return (static_cast<std::size_t>(i + extent) * w + static_cast<std::size_t>(j + extent)) * w +
         static_cast<std::size_t>(k + extent);
}

Vec3 BallGrid::center(std::size_t idx) const {
  const auto w = static_cast<std::size_t>(2 * extent + 1);
  const auto k = static_cast<int>(idx % w) - extent;
  const auto j = static_cast<int>((idx / w) % w) - extent;
  const auto i = static_cast<int>(idx / (w * w)) - extent;
  return {spacing * i, spacing * j, spacing * k};
}

BallGrid default_grid(double r, double max_distance) {
  if (!(r > 0.0)) throw ValidationError("r must be positive");
  return {r, 2.0 * r, static_cast<int>(std::ceil(max_distance / r))};
}

double segment_ball_chord(const Vec3& origin, const Vec3& dir, double length, const Vec3& center,
                          double radius) {
  const Vec3 oc = origin - center;
  const double b = dot(dir, oc);
  const double c = dot(oc, oc) - radius * radius;
  const double disc = b * b - c;
  if (disc <= 0.0) return 0.0;
  const double root = std::sqrt(disc);
  const double lo = std::max(0.0, -b - root);
  const double hi = std::min(length, -b + root);
  return hi > lo ? hi - lo : 0.0;
}

namespace {

struct Accumulator {
  std::vector<double> g, h, G, H;
  double theta = 0.0, theta2 = 0.0, h_total = 0.0, horizon = 0.0;

  explicit Accumulator(std::size_t n) : g(n, 0.0), h(n, 0.0), G(n, 0.0), H(n, 0.0) {}
};

int lattice_lo(double x, double spacing) { return static_cast<int>(std::ceil(x / spacing)); }
int lattice_hi(double x, double spacing) { return static_cast<int>(std::floor(x / spacing)); }

void add_point(const BallGrid& grid, const Vec3& y, std::vector<double>& out) {
  std::array<int, 3> lo{};
  std::array<int, 3> hi{};
  for (std::size_t a = 0; a < 3; ++a) {
    lo[a] = std::max(-grid.extent, lattice_lo(y[a] - grid.radius, grid.spacing));
    hi[a] = std::min(grid.extent, lattice_hi(y[a] + grid.radius, grid.spacing));
  }
  for (int i = lo[0]; i <= hi[0]; ++i)
    for (int j = lo[1]; j <= hi[1]; ++j)
      for (int k = lo[2]; k <= hi[2]; ++k) {
        const std::size_t idx = grid.index(i, j, k);
        const Vec3 d = y - grid.center(idx);
        if (dot(d, d) < grid.radius * grid.radius) out[idx] += 1.0;
      }
}

void add_segment(const BallGrid& grid, const Vec3& a, const Vec3& dir, double length, std::vector<double>& out) {
  const Vec3 b = advance(a, dir, length);
  std::array<int, 3> lo{};
  std::array<int, 3> hi{};
  for (std::size_t ax = 0; ax < 3; ++ax) {
    lo[ax] = std::max(-grid.extent, lattice_lo(std::min(a[ax], b[ax]) - grid.radius, grid.spacing));
    hi[ax] = std::min(grid.extent, lattice_hi(std::max(a[ax], b[ax]) + grid.radius, grid.spacing));
  }
  for (int i = lo[0]; i <= hi[0]; ++i)
    for (int j = lo[1]; j <= hi[1]; ++j)
      for (int k = lo[2]; k <= hi[2]; ++k) {
        const std::size_t idx = grid.index(i, j, k);
        out[idx] += segment_ball_chord(a, dir, length, grid.center(idx), grid.radius);
      }
}

}  // namespace

OccupationHistogram occupation_estimate(const VelocitySet& set, const Velocity& v0, double r,
                                        const BallGrid& grid, std::size_t runs,
                                        std::size_t excursions_per_run, std::uint64_t seed,
                                        unsigned threads) {
  if (runs == 0 || excursions_per_run == 0) throw ValidationError("occupation needs runs and excursions");
  OccupationHistogram out;
  out.grid = grid;
  out.runs = runs;
  out.excursions_per_run = excursions_per_run;
  out.g.assign(grid.size(), 0.0);
  out.h.assign(grid.size(), 0.0);
  out.G.assign(grid.size(), 0.0);
  out.H.assign(grid.size(), 0.0);
  double theta = 0.0;
  double theta2 = 0.0;
  // Chunks run in waves of `threads` and merge in chunk order, which keeps
  // memory bounded and the sums independent of the thread count.
  const std::size_t chunk = 64;
  const std::size_t wave = chunk * std::max(1U, threads);
  for (std::size_t w0 = 0; w0 < runs; w0 += wave) {
    const std::size_t w_runs = std::min(wave, runs - w0);
    std::vector<Accumulator> parts((w_runs + chunk - 1) / chunk, Accumulator(0));
    parallel_chunks(w_runs, chunk, threads, [&](std::size_t c, std::size_t lo, std::size_t hi) {
      Accumulator acc(grid.size());
      for (std::size_t run = w0 + lo; run < w0 + hi; ++run) {
        Rng rng = Rng::derive(seed, {0x0cc0ULL, run});
        const VirtualCollision initial = sample_virtual_collision(set, v0, r, rng);
        std::vector<Pack> packs;
        for (std::size_t e = 0; e < excursions_per_run; ++e) packs.push_back(sample_excursion_pack(set, v0, r, rng));
        const Concatenation cat = concatenate(packs, v0, initial, r);
        const FlightPath& path = cat.path;
        const std::size_t gamma1 = cat.index.Gamma[1];
        const std::size_t gammaM = cat.index.Gamma.back();
        for (std::size_t n = 0; n < gammaM; ++n) {
          add_point(grid, path.Y[n], acc.G);
          if (n < gamma1) add_point(grid, path.Y[n], acc.g);
        }
        for (std::size_t k = 1; k <= gammaM; ++k) {
          const double len = path.xi(k);
          add_segment(grid, path.Y[k - 1], path.u[k].vec(), len, acc.H);
          if (k <= gamma1) add_segment(grid, path.Y[k - 1], path.u[k].vec(), len, acc.h);
        }
        const double theta1 = cat.index.Theta[1];
        acc.theta += theta1;
        acc.theta2 += theta1 * theta1;
        acc.h_total += path.tau[gamma1];
        acc.horizon += cat.index.Theta.back();
      }
      parts[c] = std::move(acc);
    });
    for (const auto& p : parts) {
      for (std::size_t i = 0; i < grid.size(); ++i) {
        out.g[i] += p.g[i];
        out.h[i] += p.h[i];
        out.G[i] += p.G[i];
        out.H[i] += p.H[i];
      }
      theta += p.theta;
      theta2 += p.theta2;
      out.mean_h_total += p.h_total;
      out.mean_horizon += p.horizon;
    }
  }
  const double n = static_cast<double>(runs);
  for (auto* v : {&out.g, &out.h, &out.G, &out.H})
    for (double& x : *v) x /= n;
  out.mean_theta = theta / n;
  out.theta_se = std::sqrt(std::max(0.0, theta2 / n - out.mean_theta * out.mean_theta) / n);
  out.mean_h_total /= n;
  out.mean_horizon /= n;
  return out;
}

std::vector<double> radial_profile(const OccupationHistogram& hist, const std::vector<double>& values,
                                   double lo, double hi, std::size_t bins) {
  std::vector<double> sum(bins, 0.0);
  std::vector<double> count(bins, 0.0);
  const double w = (hi - lo) / static_cast<double>(bins);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = norm(hist.grid.center(i));
    if (d < lo || d >= hi) continue;
    const auto b = std::min(bins - 1, static_cast<std::size_t>((d - lo) / w));
    sum[b] += values[i];
    count[b] += 1.0;
  }
  for (std::size_t b = 0; b < bins; ++b) sum[b] = count[b] > 0.0 ? sum[b] / count[b] : 0.0;
  return sum;
}

}  // namespace windtree
