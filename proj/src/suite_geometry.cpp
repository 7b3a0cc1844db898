#include <cmath>

#include <fmt/format.h>

#include "suites_internal.hpp"
#include "windtree/parallel.hpp"

namespace windtree {

using namespace detail;

namespace {

// Brute-force oracles march each path with a fixed step s = r/1000.
// Entries whose exact chord through the cube is shorter than two steps are
// below the oracle's resolution and are only counted.
constexpr double kStepsPerR = 1000.0;

enum class Verdict : std::uint8_t { agree, disagree, resolution_limited };

ProbabilityVector random_p(Rng& rng) {
  const double a = 0.1 + rng.uniform();
  const double b = 0.1 + rng.uniform();
  const double c = 0.1 + rng.uniform();
  const double s = a + b + c;
  return {a / s, b / s, 1.0 - a / s - b / s};
}

Vec3 uniform_box(Rng& rng, double h) { return {rng.uniform(-h, h), rng.uniform(-h, h), rng.uniform(-h, h)}; }

Vec3 lattice_dir(const VelocitySet& set, Rng& rng) {
  return set[static_cast<std::uint8_t>(rng.next_u64() & 7U)].vec();
}

struct EntryResult {
  Verdict verdict = Verdict::agree;
  bool face_checked = false;
};

EntryResult entry_scene(Rng& rng) {
  const VelocitySet set(random_p(rng));
  const double r = rng.uniform(0.05, 0.2);
  const double step = r / kStepsPerR;
  const CubeObstacle cube{uniform_box(rng, 1.0), 0.5 * r};
  const Velocity v = set[static_cast<std::uint8_t>(rng.next_u64() & 7U)];
  const double L = rng.uniform(r, 3.0 * r);
  Vec3 origin;
  do {
    origin = advance(cube.center, v.vec(), -L) + uniform_box(rng, r);
  } while (in_open_cube(origin, cube, 0.0));
  const auto exact = ray_cube_entry(origin, v, cube);
  const double t_max = L + 4.0 * r;
  const auto chord = segment_open_cube_overlap(origin, v.vec(), t_max, cube, 0.0);
  const bool thin = !chord || chord->second - chord->first < 2.0 * step;

  std::optional<double> t_brute;
  Vec3 prev = origin;
  const auto steps = static_cast<std::size_t>(std::ceil(t_max / step));
  for (std::size_t k = 1; k <= steps; ++k) {
    const Vec3 x = advance(origin, v.vec(), static_cast<double>(k) * step);
    if (in_open_cube(x, cube, 0.0)) {
      t_brute = static_cast<double>(k) * step;
      break;
    }
    prev = x;
  }
  EntryResult out;
  if (exact.has_value() != t_brute.has_value()) {
    out.verdict = thin ? Verdict::resolution_limited : Verdict::disagree;
    return out;
  }
  if (!exact) return out;
  if (std::fabs(exact->t - *t_brute) > r / 500.0) {
    out.verdict = thin ? Verdict::resolution_limited : Verdict::disagree;
    return out;
  }
  // Face from the last outside sample; ambiguous when it was outside on
  // more than one axis.
  int outside = 0;
  Face f{};
  for (int i = 0; i < 3; ++i) {
    const double d = prev[static_cast<std::size_t>(i)] - cube.center[static_cast<std::size_t>(i)];
    if (std::fabs(d) >= cube.half_side) {
      ++outside;
      f = {i, d < 0.0 ? -1 : 1};
    }
  }
  if (outside == 1 && !exact->tie) {
    out.face_checked = true;
    if (!(f == exact->face)) out.verdict = thin ? Verdict::resolution_limited : Verdict::disagree;
  }
  return out;
}

std::vector<PathPiece> random_path(const VelocitySet& set, double r, double t0, const Vec3& start,
                                   std::size_t count, Rng& rng) {
  std::vector<PathPiece> out;
  Vec3 x = start;
  double t = t0;
  for (std::size_t i = 0; i < count; ++i) {
    const Vec3 d = lattice_dir(set, rng);
    const double len = rng.uniform(0.0, 3.0 * r);
    out.push_back({x, d, t, t + len});
    x = advance(x, d, len);
    t += len;
  }
  return out;
}

Vec3 point_on(const std::vector<PathPiece>& pieces, Rng& rng) {
  const auto& p = pieces[static_cast<std::size_t>(rng.next_u64() % pieces.size())];
  return advance(p.origin, p.dir, rng.uniform(0.0, p.t1 - p.t0));
}

std::vector<CubeObstacle> cubes_near(const std::vector<PathPiece>& pieces, double r, std::size_t count, Rng& rng) {
  std::vector<CubeObstacle> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back({point_on(pieces, rng) + uniform_box(rng, r), 0.5 * r});
  return out;
}

// Marches every piece against every cube. Returns (some sample inside,
// longest exact chord).
std::pair<bool, double> march(const std::vector<PathPiece>& pieces, const std::vector<CubeObstacle>& cubes,
                              double step) {
  bool inside = false;
  double longest = 0.0;
  for (const auto& p : pieces) {
    const double len = p.t1 - p.t0;
    for (const auto& c : cubes) {
      if (const auto ch = segment_open_cube_overlap(p.origin, p.dir, len, c, 0.0))
        longest = std::fmax(longest, ch->second - ch->first);
      if (inside) continue;
      const auto steps = static_cast<std::size_t>(std::floor(len / step));
      for (std::size_t k = 0; k <= steps + 1 && !inside; ++k) {
        const double s = std::fmin(static_cast<double>(k) * step, len);
        if (in_open_cube(advance(p.origin, p.dir, s), c, 0.0)) inside = true;
      }
    }
  }
  return {inside, longest};
}

Verdict compare(bool exact_ok, bool brute_inside, double longest, double step) {
  if (exact_ok == !brute_inside) return Verdict::agree;
  return longest < 2.0 * step ? Verdict::resolution_limited : Verdict::disagree;
}

Verdict consistent_scene(Rng& rng) {
  const VelocitySet set(random_p(rng));
  const double r = rng.uniform(0.05, 0.2);
  const auto path = random_path(set, r, 0.0, uniform_box(rng, 1.0), 3, rng);
  const auto cubes = cubes_near(path, r, 3, rng);
  const bool exact = r_consistent(path, cubes);
  const auto [inside, longest] = march(path, cubes, r / kStepsPerR);
  return compare(exact, inside, longest, r / kStepsPerR);
}

struct CompatResult {
  Verdict verdict = Verdict::agree;
  bool symmetric = true;
};

CompatResult compatible_scene(Rng& rng) {
  const VelocitySet set(random_p(rng));
  const double r = rng.uniform(0.05, 0.2);
  const auto a = random_path(set, r, 0.0, uniform_box(rng, 1.0), 2, rng);
  const Vec3 b_start = advance(a.back().origin, a.back().dir, a.back().t1 - a.back().t0) + uniform_box(rng, r);
  const auto b = random_path(set, r, a.back().t1, b_start, 2, rng);
  std::vector<PathPiece> ab = a;
  ab.insert(ab.end(), b.begin(), b.end());
  const auto ca = cubes_near(ab, r, 2, rng);
  const auto cb = cubes_near(ab, r, 2, rng);
  CompatResult out;
  const bool exact = r_compatible(a, ca, b, cb);
  out.symmetric = exact == r_compatible(b, cb, a, ca);
  const double step = r / kStepsPerR;
  const auto [in_a, long_a] = march(a, cb, step);
  const auto [in_b, long_b] = march(b, ca, step);
  out.verdict = compare(exact, in_a || in_b, std::fmax(long_a, long_b), step);
  return out;
}

struct Tally {
  std::size_t agree = 0, disagree = 0, limited = 0;
  void add(Verdict v) {
    if (v == Verdict::agree) ++agree;
    else if (v == Verdict::disagree) ++disagree;
    else ++limited;
  }
  Json json() const { return {{"agree", agree}, {"disagree", disagree}, {"resolution_limited", limited}}; }
};

}  // namespace

SuiteResult suite_geometry(const SuiteContext& ctx) {
  const auto& cfg = ctx.cfg;
  SuiteResult res;
  res.alpha = 0.0;
  const std::size_t n = sized(cfg, 10000, 100);

  const auto entries = parallel_map<EntryResult>(
      n, cfg.threads,
      [&](std::size_t k) {
        Rng rng = Rng::derive(ctx.seed, {0x61ULL, k});
        return entry_scene(rng);
      },
      64);
  const auto consistent = parallel_map<Verdict>(
      n, cfg.threads,
      [&](std::size_t k) {
        Rng rng = Rng::derive(ctx.seed, {0x62ULL, k});
        return consistent_scene(rng);
      },
      64);
  const auto compatible = parallel_map<CompatResult>(
      n, cfg.threads,
      [&](std::size_t k) {
        Rng rng = Rng::derive(ctx.seed, {0x63ULL, k});
        return compatible_scene(rng);
      },
      64);

  Tally te, tc, tp;
  std::size_t faces = 0;
  std::size_t asym = 0;
  for (const auto& e : entries) {
    te.add(e.verdict);
    faces += e.face_checked;
  }
  for (auto v : consistent) tc.add(v);
  for (const auto& c : compatible) {
    tp.add(c.verdict);
    asym += !c.symmetric;
  }
  // Adversarial: flip the oracle's verdict, which must be caught.
  const std::size_t bad_e = cfg.adversarial ? te.agree : te.disagree;
  res.gates.push_back(gate("ray_cube_entry_vs_march", bad_e == 0, static_cast<double>(bad_e), n, ctx.seed,
                           fmt::format("entry time within r/500 and entry face; {} faces checked", faces)));
  res.gates.push_back(gate("r_consistent_vs_march", tc.disagree == 0, static_cast<double>(tc.disagree), n, ctx.seed,
                           "3-piece paths against 3 nearby cubes"));
  res.gates.push_back(gate("r_compatible_vs_march", tp.disagree == 0 && asym == 0, static_cast<double>(tp.disagree),
                           n, ctx.seed, "2+2-piece paths against crossed cube sets; symmetric in its arguments"));
  res.data = {{"n", n},
              {"step", "r/1000"},
              {"ray_cube_entry", te.json()},
              {"faces_checked", faces},
              {"r_consistent", tc.json()},
              {"r_compatible", tp.json()},
              {"asymmetric", asym}};
  return res;
}

}  // namespace windtree
