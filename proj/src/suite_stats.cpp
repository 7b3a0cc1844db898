#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "suites_internal.hpp"
#include "windtree/occupation.hpp"
#include "windtree/parallel.hpp"

namespace windtree {

using namespace detail;

namespace {

const std::vector<double> kDefaultGrid{0.01, 0.02, 0.04, 0.08};

std::vector<double> grid_or(const ExperimentConfig& cfg, const std::vector<double>& def) {
  return cfg.r_grid.empty() ? def : cfg.r_grid;
}

struct PairSample {
  double first = 0.0;
  double second = 0.0;
};

enum class ParityMode { resample, identity, always_insert };

std::vector<PairSample> parity_samples(ParityMode mode, std::size_t n, std::uint64_t seed, unsigned threads) {
  return parallel_map<PairSample>(
      n, threads,
      [&](std::size_t k) {
        Rng rng = Rng::derive(seed, {0x9a41ULL, k});
        std::vector<double> taus(3);
        double t = 0.0;
        for (double& x : taus) {
          t += rng.exponential();
          x = t;
        }
        const double xp = rng.exponential();
        std::vector<double> out;
        switch (mode) {
          case ParityMode::resample: out = parity_resample(taus, xp); break;
          case ParityMode::identity: out = taus; break;
          case ParityMode::always_insert:
            out = taus;
            out.insert(std::upper_bound(out.begin(), out.end(), xp), xp);
            break;
        }
        return PairSample{out[0], out[1] - out[0]};
      },
      4096);
}

struct ParityVerdict {
  KsResult first, second;
  double corr_z = 0.0;
};

ParityVerdict judge_parity(const std::vector<PairSample>& s) {
  std::vector<double> a;
  std::vector<double> b;
  for (const auto& x : s) {
    a.push_back(x.first);
    b.push_back(x.second);
  }
  ParityVerdict v;
  v.corr_z = pearson(a, b) * std::sqrt(static_cast<double>(s.size()));
  v.first = ks_one_sample(std::move(a), exponential_cdf);
  v.second = ks_one_sample(std::move(b), exponential_cdf);
  return v;
}

}  // namespace

SuiteResult suite_parity(const SuiteContext& ctx) {
  const auto& cfg = ctx.cfg;
  SuiteResult res;
  const std::size_t n = sized(cfg, 100000, 1000);
  const std::size_t runs = scaled(cfg, 100000, 200);
  res.alpha = 0.01 / 4.0;
  const double a = res.alpha;

  const auto primary = judge_parity(
      parity_samples(cfg.adversarial ? ParityMode::always_insert : ParityMode::resample, n, ctx.seed, cfg.threads));
  const auto identity = judge_parity(parity_samples(ParityMode::identity, n, ctx.seed, cfg.threads));
  const auto insert = judge_parity(parity_samples(ParityMode::always_insert, n, ctx.seed, cfg.threads));

  res.gates.push_back(gate("first_point_exp1", primary.first.p_value > a, primary.first.d, n, ctx.seed,
                           "KS of tau'_1 against EXP(1)", primary.first.p_value, a));
  res.gates.push_back(gate("second_increment_exp1", primary.second.p_value > a, primary.second.d, n, ctx.seed,
                           "KS of tau'_2 - tau'_1 against EXP(1)", primary.second.p_value, a));
  res.gates.push_back(gate("increment_independence", std::fabs(primary.corr_z) <= 4.0, primary.corr_z, n, ctx.seed,
                           "sample correlation of the first two increments, in units of 1/sqrt(N), within 4"));
  const bool identity_ok =
      identity.first.p_value > a && identity.second.p_value > a && std::fabs(identity.corr_z) <= 4.0;
  res.gates.push_back(gate("identity_control_passes", identity_ok, identity.first.d, n, ctx.seed,
                           "unedited Poisson points pass the same three gates", identity.first.p_value, a));
  res.gates.push_back(gate("always_insert_control_rejected", insert.first.p_value <= a, insert.first.d, n, ctx.seed,
                           "sorted insertion without deletion must fail the first-point gate",
                           insert.first.p_value, a));

  // Attempt times of the coupled X and Z processes: pooled first six
  // increments must again be EXP(1).
  const double r_sys = 0.25;
  const double horizon = 30.0;
  struct RunIncrements {
    std::array<double, 6> x{}, z{};
    bool ok = false;
    std::array<std::size_t, 7> situations{};
  };
  const Velocity v0 = ctx.set[0];
  const auto incs = parallel_map<RunIncrements>(
      runs, cfg.threads,
      [&](std::size_t k) {
        Rng rng = Rng::derive(ctx.seed, {0x5157ULL, k});
        const CoupledTriple t = build_coupled(ctx.set, v0, r_sys, horizon, rng);
        RunIncrements out;
        out.situations = t.log.situation_counts();
        if (t.X.attempts.size() < 6 || t.Z.attempts.size() < 6) return out;
        double px = 0.0;
        double pz = 0.0;
        for (std::size_t i = 0; i < 6; ++i) {
          out.x[i] = t.X.attempts[i].t - px;
          out.z[i] = t.Z.attempts[i].t - pz;
          px = t.X.attempts[i].t;
          pz = t.Z.attempts[i].t;
        }
        out.ok = true;
        return out;
      },
      64);
  std::vector<double> xs;
  std::vector<double> zs;
  std::array<std::size_t, 7> situations{};
  std::size_t short_runs = 0;
  for (const auto& r : incs) {
    for (std::size_t s = 0; s < 7; ++s) situations[s] += r.situations[s];
    if (!r.ok) {
      ++short_runs;
      continue;
    }
    xs.insert(xs.end(), r.x.begin(), r.x.end());
    zs.insert(zs.end(), r.z.begin(), r.z.end());
  }
  const std::size_t pooled = xs.size();
  const auto ksx = ks_one_sample(xs, exponential_cdf);
  const auto ksz = ks_one_sample(zs, exponential_cdf);
  res.gates.push_back(gate("coupled_x_attempts_exp1", ksx.p_value > a, ksx.d, pooled, ctx.seed,
                           fmt::format("pooled first six X attempt increments, r={}, {} runs", r_sys, runs),
                           ksx.p_value, a));
  res.gates.push_back(gate("coupled_z_attempts_exp1", ksz.p_value > a, ksz.d, pooled, ctx.seed,
                           fmt::format("pooled first six Z attempt increments, r={}, {} runs", r_sys, runs),
                           ksz.p_value, a));

  Json sit;
  const char* labels = "ABCDEFG";
  for (std::size_t s = 0; s < 7; ++s) sit[std::string(1, labels[s])] = situations[s];
  res.data = {{"n", n},
              {"primary", {{"ks_first", primary.first.d}, {"p_first", primary.first.p_value},
                           {"ks_second", primary.second.d}, {"p_second", primary.second.p_value},
                           {"corr_z", primary.corr_z}}},
              {"identity", {{"p_first", identity.first.p_value}, {"p_second", identity.second.p_value},
                            {"corr_z", identity.corr_z}}},
              {"always_insert", {{"p_first", insert.first.p_value}, {"p_second", insert.second.p_value}}},
              {"coupled", {{"r", r_sys}, {"horizon", horizon}, {"runs", runs}, {"short_runs", short_runs},
                           {"ks_x", ksx.d}, {"p_x", ksx.p_value}, {"ks_z", ksz.d}, {"p_z", ksz.p_value},
                           {"situation_intervals", sit}}}};
  return res;
}

SuiteResult suite_direct_rate(const SuiteContext& ctx) {
  const auto& cfg = ctx.cfg;
  SuiteResult res;
  res.alpha = 0.01;
  const auto grid = grid_or(cfg, kDefaultGrid);
  const std::size_t n = sized(cfg, 1000000, 1000);
  const std::size_t n_control = std::max<std::size_t>(1000, n / 4);

  // Control: the detector always runs at the middle r of the grid, so the
  // rate cannot follow the grid labels.
  std::vector<RatePoint> control;
  const double r_fixed = grid[grid.size() / 2];
  for (std::size_t i = 0; i < grid.size(); ++i) {
    auto pt = estimate_rates(RateEvent::direct, cfg.p, {r_fixed}, n_control, hash_keys(ctx.seed, {0xc0, i}),
                             cfg.threads);
    pt[0].r = grid[i];
    control.push_back(pt[0]);
  }
  const auto rates =
      cfg.adversarial ? control : estimate_rates(RateEvent::direct, cfg.p, grid, n, ctx.seed, cfg.threads);
  const ScalingFit fit = fit_rates(rates);
  const ScalingFit cfit = fit_rates(control);
  res.gates.push_back(slope_gate("direct_slope", fit, 0.8, 1.2, n, ctx.seed));
  auto cg = slope_gate("fixed_r_control_rejected", cfit, 0.8, 1.2, n_control, ctx.seed);
  cg.pass = !cg.pass;
  cg.detail = "control with r held at " + format_double(r_fixed) + ": " + cg.detail + " must fail";
  res.gates.push_back(cg);

  res.data = {{"n_per_r", n}, {"rates", rates_json(rates)}, {"fit", fit_json(fit)},
              {"control", {{"rates", rates_json(control)}, {"fit", fit_json(cfit)}}}};
  write_text(ctx.dir / "rates.csv", rates_csv(rates));
  write_text(ctx.dir / "rates.svg",
             svg_plot({rate_series("E[eta]", rates)}, "direct mismatch rate", "r", "rate", true, true));
  return res;
}

SuiteResult suite_indirect_rate(const SuiteContext& ctx) {
  const auto& cfg = ctx.cfg;
  SuiteResult res;
  res.alpha = 0.01;
  const auto grid = grid_or(cfg, kDefaultGrid);
  const std::size_t n_pair = sized(cfg, 1000000, 1000);
  const std::size_t n_paths = scaled(cfg, 400000, 1000);
  auto pairwise = estimate_rates(RateEvent::pairwise, cfg.p, grid, n_pair, ctx.seed, cfg.threads);
  auto indirect = estimate_rates(RateEvent::indirect, cfg.p, grid, n_paths, ctx.seed, cfg.threads);

  // Control: union of direct and indirect events on the same paths; the
  // direct part dominates and drags the slope towards 1.
  std::vector<RatePoint> control;
  const std::size_t n_control = std::max<std::size_t>(1000, n_paths / 4);
  for (std::size_t ri = 0; ri < grid.size(); ++ri) {
    const double r = grid[ri];
    const auto hits = parallel_map<std::uint32_t>(
        n_control, cfg.threads,
        [&](std::size_t k) {
          Rng rng = Rng::derive(ctx.seed, {0xc1ULL, ri, k});
          const FlightPath f = sample_flight_collisions(ctx.set, random_velocity(ctx.set, rng), 16, r, rng);
          std::uint32_t c = 0;
          for (std::size_t j = 4; j <= 16; ++j)
            c += (detect_indirect_mismatch(f, j).any() || detect_direct_mismatch(f, j).any()) ? 1 : 0;
          return c;
        },
        1024);
    std::uint64_t events = 0;
    for (auto h : hits) events += h;
    RatePoint p;
    p.r = r;
    p.events = events;
    p.n = n_control * 13;
    p.rate = static_cast<double>(events) / static_cast<double>(p.n);
    p.ci = wilson_interval(events, p.n);
    control.push_back(p);
  }
  if (cfg.adversarial) indirect = control;

  const ScalingFit pfit = fit_rates(pairwise);
  const ScalingFit ifit = fit_rates(indirect);
  const ScalingFit cfit = fit_rates(control);
  res.gates.push_back(slope_gate("pairwise_slope", pfit, 1.7, 2.3, n_pair, ctx.seed));
  res.gates.push_back(slope_gate("indirect_slope", ifit, 1.7, 2.3, n_paths, ctx.seed));
  const bool enough = std::all_of(pairwise.begin(), pairwise.end(), [](const RatePoint& p) { return p.events >= 100; });
  res.gates.push_back(gate("pairwise_event_counts", enough, static_cast<double>(pairwise.front().events), n_pair,
                           ctx.seed, "every r reaches at least 100 joint events"));
  auto cg = slope_gate("union_control_rejected", cfit, 1.7, 2.3, n_control, ctx.seed);
  cg.pass = !cg.pass;
  cg.detail = "direct-or-indirect control: " + cg.detail + " must fail";
  res.gates.push_back(cg);

  res.data = {{"pairwise", {{"batch", n_pair}, {"rates", rates_json(pairwise)}, {"fit", fit_json(pfit)}}},
              {"indirect", {{"paths", n_paths}, {"j_range", {4, 16}}, {"rates", rates_json(indirect)},
                            {"fit", fit_json(ifit)}}},
              {"control", {{"rates", rates_json(control)}, {"fit", fit_json(cfit)}}}};
  write_text(ctx.dir / "pairwise.csv", rates_csv(pairwise));
  write_text(ctx.dir / "indirect.csv", rates_csv(indirect));
  write_text(ctx.dir / "rates.svg", svg_plot({rate_series("E[eta_j eta_j+1]", pairwise),
                                              rate_series("E[eta°_j]", indirect)},
                                             "pairwise and indirect mismatch rates", "r", "rate", true, true));
  return res;
}

namespace {

LinIndSetup lin_ind_setup(const VelocitySet& set, double r) {
  const Velocity& U1 = set[0];
  const Velocity& U2 = set[1];
  const Velocity& U3 = set[3];
  const Vec3 s = U1.vec() + U2.vec() + 0.5 * U3.vec();
  return make_lin_ind_setup(U1, U2, U3, s, r);
}

// Paired difference of the geometric indicator at r and the slab formula
// evaluated for a different cube size.
LinIndReport mismatched_lin_ind(const LinIndSetup& geo, const LinIndSetup& slab, std::size_t n, std::uint64_t seed,
                                unsigned threads) {
  const std::size_t chunk = 1 << 14;
  struct Acc {
    double sd = 0, sdd = 0, sx = 0, sy = 0;
  };
  std::vector<Acc> acc((n + chunk - 1) / chunk);
  parallel_chunks(n, chunk, threads, [&](std::size_t c, std::size_t lo, std::size_t hi) {
    Rng rng = Rng::derive(seed, {0x11dULL, c});
    Acc a;
    for (std::size_t i = lo; i < hi; ++i) {
      const double xi1 = rng.exponential();
      const double xi2 = rng.exponential();
      const double xi3 = rng.exponential();
      const double x = lin_ind_hit(geo, xi1, xi2, xi3) ? 1.0 : 0.0;
      const double y = lin_ind_conditional(slab, xi2, xi3);
      a.sx += x;
      a.sy += y;
      a.sd += x - y;
      a.sdd += (x - y) * (x - y);
    }
    acc[c] = a;
  });
  Acc t;
  for (const auto& a : acc) {
    t.sd += a.sd;
    t.sdd += a.sdd;
    t.sx += a.sx;
    t.sy += a.sy;
  }
  const double nn = static_cast<double>(n);
  LinIndReport rep;
  rep.n = n;
  rep.p_geometric = t.sx / nn;
  rep.p_slab = t.sy / nn;
  rep.diff = t.sd / nn;
  rep.se_diff = std::sqrt(std::max(0.0, t.sdd / nn - rep.diff * rep.diff) / nn);
  rep.agree = std::fabs(rep.diff) <= 2.0 * rep.se_diff;
  return rep;
}

Json lin_ind_json(const LinIndReport& r) {
  return {{"n", r.n},           {"p_geometric", r.p_geometric}, {"se_geometric", r.se_geometric},
          {"p_slab", r.p_slab}, {"se_slab", r.se_slab},         {"diff", r.diff},
          {"se_diff", r.se_diff}, {"agree", r.agree}};
}

}  // namespace

SuiteResult suite_lin_ind(const SuiteContext& ctx) {
  const auto& cfg = ctx.cfg;
  SuiteResult res;
  res.alpha = 0.01;
  const double r0 = cfg.r.value_or(0.05);
  const std::size_t n = sized(cfg, 1000000, 1000);
  const std::size_t n_grid = scaled(cfg, 1000000, 1000);
  const auto grid = grid_or(cfg, kDefaultGrid);

  const LinIndReport agree = cfg.adversarial
                                 ? mismatched_lin_ind(lin_ind_setup(ctx.set, r0), lin_ind_setup(ctx.set, 1.1 * r0), n,
                                                      ctx.seed, cfg.threads)
                                 : lin_ind_probability(lin_ind_setup(ctx.set, r0), n, ctx.seed, cfg.threads);
  const LinIndReport wrong =
      mismatched_lin_ind(lin_ind_setup(ctx.set, r0), lin_ind_setup(ctx.set, 1.1 * r0), n, ctx.seed, cfg.threads);
  res.gates.push_back(gate("methods_agree", agree.agree, agree.diff / agree.se_diff, n, ctx.seed,
                           fmt::format("geometric {} vs slab {}: paired difference within 2 se at r={}",
                                       format_double(agree.p_geometric), format_double(agree.p_slab), r0)));
  res.gates.push_back(gate("wrong_size_control_rejected", !wrong.agree, wrong.diff / wrong.se_diff, n, ctx.seed,
                           "slab formula at 1.1 r against geometry at r must disagree"));

  std::vector<RatePoint> geo;
  std::vector<RatePoint> slab;
  std::vector<RatePoint> control;
  Json per_r = Json::array();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double r = cfg.adversarial ? grid[grid.size() / 2] : grid[i];
    const auto rep = lin_ind_probability(lin_ind_setup(ctx.set, r), n_grid, hash_keys(ctx.seed, {i}), cfg.threads);
    const auto crep = lin_ind_probability(lin_ind_setup(ctx.set, grid[grid.size() / 2]), n_grid / 4,
                                          hash_keys(ctx.seed, {0xc2, i}), cfg.threads);
    RatePoint g{grid[i], static_cast<std::uint64_t>(std::llround(rep.p_geometric * static_cast<double>(n_grid))),
                n_grid, rep.p_geometric, {rep.p_geometric - 2 * rep.se_geometric, rep.p_geometric + 2 * rep.se_geometric}};
    RatePoint s{grid[i], 0, n_grid, rep.p_slab, {rep.p_slab - 2 * rep.se_slab, rep.p_slab + 2 * rep.se_slab}};
    RatePoint c{grid[i], 0, n_grid / 4, crep.p_slab, {crep.p_slab - 2 * crep.se_slab, crep.p_slab + 2 * crep.se_slab}};
    geo.push_back(g);
    slab.push_back(s);
    control.push_back(c);
    per_r.push_back(lin_ind_json(rep));
  }
  const ScalingFit gfit = fit_rates(geo);
  const ScalingFit sfit = fit_rates(slab);
  const ScalingFit cfit = fit_rates(control);
  res.gates.push_back(slope_gate("slab_slope", sfit, 1.8, 2.2, n_grid, ctx.seed));
  res.gates.push_back(slope_gate("geometric_slope", gfit, 1.8, 2.2, n_grid, ctx.seed));
  auto cg = slope_gate("fixed_cube_control_rejected", cfit, 1.8, 2.2, n_grid / 4, ctx.seed);
  cg.pass = !cg.pass;
  cg.detail = "cube size held fixed: " + cg.detail + " must fail";
  res.gates.push_back(cg);

  res.data = {{"r", r0},
              {"velocities", {"(+,+,+)", "(-,+,+)", "(-,-,+)"}},
              {"s", "U1 + U2 + U3/2"},
              {"agreement", lin_ind_json(agree)},
              {"wrong_size_control", lin_ind_json(wrong)},
              {"grid", per_r},
              {"fit_geometric", fit_json(gfit)},
              {"fit_slab", fit_json(sfit)},
              {"control_fit", fit_json(cfit)}};
  write_text(ctx.dir / "slab.csv", rates_csv(slab));
  write_text(ctx.dir / "rates.svg",
             svg_plot({rate_series("geometric", geo), rate_series("slab", slab)}, "three-segment hitting probability",
                      "r", "probability", true, true));
  return res;
}

namespace {

Json matrix_json(const std::array<std::array<double, 3>, 3>& m) {
  return {{m[0][0], m[0][1], m[0][2]}, {m[1][0], m[1][1], m[1][2]}, {m[2][0], m[2][1], m[2][2]}};
}

std::vector<Vec3> scaled_points(const std::vector<Vec3>& pts, double T) {
  std::vector<Vec3> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back((1.0 / std::sqrt(T)) * p);
  return out;
}

}  // namespace

SuiteResult suite_covariance(const SuiteContext& ctx) {
  const auto& cfg = ctx.cfg;
  SuiteResult res;
  res.alpha = 0.01 / 6.0;
  const double a = res.alpha;
  const Velocity v0 = ctx.set[0];
  const double r_x = cfg.r.value_or(0.05);
  const double T_y = cfg.T ? cfg.T->at(r_x) : 1000.0;
  const double T_x = cfg.T ? cfg.T->at(r_x) : 200.0;
  const double T_c = 1.0;
  const std::size_t n_y = sized(cfg, 100000, 1000);
  const std::size_t n_x = scaled(cfg, 10000, 500);
  const std::size_t n_c = scaled(cfg, 10000, 500);

  auto y_endpoints = [&](double T, std::size_t n, std::uint64_t tag) {
    return parallel_map<Vec3>(
        n, cfg.threads,
        [&](std::size_t k) {
          Rng rng = Rng::derive(ctx.seed, {tag, k});
          return sample_flight_endpoint(ctx.set, v0, T, r_x, rng);
        },
        256);
  };
  const double T_primary = cfg.adversarial ? T_c : T_y;
  const auto ye = y_endpoints(T_primary, n_y, 0x1);
  const CovarianceReport rep = endpoint_covariance(ye, T_primary, cfg.p);
  for (std::size_t i = 0; i < 3; ++i) {
    res.gates.push_back(gate(fmt::format("y_gaussian_{}", i + 1), rep.ks_p[i] > a, rep.ks_d[i], n_y, ctx.seed,
                             "KS of Y(T)/sqrt(T) against the fitted normal", rep.ks_p[i], a));
  }
  for (std::size_t i = 0; i < 3; ++i) {
    res.gates.push_back(gate(fmt::format("y_variance_{}", i + 1), std::fabs(rep.rel_dev_derived[i]) <= 0.05,
                             rep.rel_dev_derived[i], n_y, ctx.seed,
                             fmt::format("empirical {} vs v_i^2/p_i = {}: relative deviation within 5%",
                                         format_double(rep.empirical.cov[i][i]), format_double(rep.derived[i]))));
  }
  const char* pairs[] = {"12", "13", "23"};
  for (std::size_t q = 0; q < 3; ++q) {
    res.gates.push_back(gate(fmt::format("y_offdiag_{}", pairs[q]), std::fabs(rep.offdiag_z[q]) <= 4.0,
                             rep.offdiag_z[q], n_y, ctx.seed, "off-diagonal covariance within 4 se of 0"));
  }

  // Coupled exploration process.
  const auto xe_raw = parallel_map<Vec3>(
      n_x, cfg.threads,
      [&](std::size_t k) {
        Rng rng = Rng::derive(ctx.seed, {0x2ULL, k});
        const CoupledTriple t = build_coupled(ctx.set, v0, r_x, T_x, rng);
        return t.X.path.position_at(T_x);
      },
      16);
  const auto xe = scaled_points(xe_raw, T_x);
  const auto xks = gaussianity(xe);
  const Moments3 xm = moments(xe);
  for (std::size_t i = 0; i < 3; ++i) {
    res.gates.push_back(gate(fmt::format("x_gaussian_{}", i + 1), xks[i].p_value > a, xks[i].d, n_x, ctx.seed,
                             fmt::format("KS of X(T)/sqrt(T) at r={}, T={}", r_x, format_double(T_x)),
                             xks[i].p_value, a));
  }

  // Power check at the kinetic scale.
  const auto ce = scaled_points(y_endpoints(T_c, n_c, 0x3), T_c);
  const auto cks = gaussianity(ce);
  const double min_p = std::min({cks[0].p_value, cks[1].p_value, cks[2].p_value});
  res.gates.push_back(gate("kinetic_scale_control_rejected", min_p <= a, std::max({cks[0].d, cks[1].d, cks[2].d}),
                           n_c, ctx.seed, "Y(1) must fail the Gaussianity gate", min_p, a));

  Json bare = Json::array();
  for (std::size_t i = 0; i < 3; ++i) {
    bare.push_back({{"axis", i + 1}, {"candidate", rep.bare[i]}, {"rel_dev", rep.rel_dev_bare[i]}});
  }
  res.data = {{"y", {{"T", T_primary}, {"n", n_y}, {"mean", {rep.empirical.mean[0], rep.empirical.mean[1], rep.empirical.mean[2]}},
                     {"cov", matrix_json(rep.empirical.cov)}, {"cov_se", matrix_json(rep.empirical.cov_se)},
                     {"derived_diag", rep.derived}, {"rel_dev_derived", rep.rel_dev_derived},
                     {"bare_diag", bare}, {"offdiag_z", rep.offdiag_z}, {"ks_d", rep.ks_d}, {"ks_p", rep.ks_p}}},
              {"x", {{"r", r_x}, {"T", T_x}, {"n", n_x}, {"cov", matrix_json(xm.cov)},
                     {"ks_d", {xks[0].d, xks[1].d, xks[2].d}}, {"ks_p", {xks[0].p_value, xks[1].p_value, xks[2].p_value}}}},
              {"kinetic_control", {{"T", T_c}, {"n", n_c}, {"ks_p", {cks[0].p_value, cks[1].p_value, cks[2].p_value}}}}};
  std::string csv = "axis,empirical,se,telegraph_v2_over_p,rel_dev_telegraph,v2,rel_dev_v2\n";
  for (std::size_t i = 0; i < 3; ++i) {
    csv += fmt::format("{},{},{},{},{},{},{}\n", i + 1, format_double(rep.empirical.cov[i][i]),
                       format_double(rep.empirical.var_se[i]), format_double(rep.derived[i]),
                       format_double(rep.rel_dev_derived[i]), format_double(rep.bare[i]),
                       format_double(rep.rel_dev_bare[i]));
  }
  write_text(ctx.dir / "covariance.csv", csv);
  return res;
}

SuiteResult suite_occupation(const SuiteContext& ctx) {
  const auto& cfg = ctx.cfg;
  SuiteResult res;
  res.alpha = 0.01;
  const double r = cfg.r.value_or(0.25);
  const std::size_t runs = sized(cfg, 20000, 200);
  const std::size_t excursions = 4;
  const BallGrid grid = default_grid(r, 6.0);
  const Velocity v0 = ctx.set[0];
  const OccupationHistogram hist = occupation_estimate(ctx.set, v0, r, grid, runs, excursions, ctx.seed, cfg.threads);

  // Kac: the chain is doubly stochastic on 8 states, so E[gamma] = 8 and by
  // Wald E[theta_1] = 8.
  const double z = (hist.mean_h_total - 8.0) / hist.theta_se;
  res.gates.push_back(gate("h_total_matches_mean_duration", std::fabs(z) <= 4.0, z, runs, ctx.seed,
                           fmt::format("h(R^3) = {} vs E[theta_1] = 8", format_double(hist.mean_h_total))));

  std::vector<double> flat(hist.g.size(), 1.0);
  const auto profile = radial_profile(hist, cfg.adversarial ? flat : hist.g, 1.0, 5.0, 4);
  const auto control = radial_profile(hist, flat, 1.0, 5.0, 4);
  auto decreasing = [](const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
      if (!(v[i] < v[i - 1])) return false;
    return true;
  };
  res.gates.push_back(gate("g_decays_with_distance", decreasing(profile), profile.back(), runs, ctx.seed,
                           "mean g-mass per ball strictly decreasing over distance bins [1,2),...,[4,5)"));
  res.gates.push_back(gate("flat_measure_control_rejected", !decreasing(control), control.back(), runs, ctx.seed,
                           "a constant measure must fail the decay gate"));
  const std::size_t origin = grid.index(0, 0, 0);
  res.gates.push_back(gate("G_dominates_g_at_origin", hist.G[origin] >= hist.g[origin], hist.G[origin] - hist.g[origin],
                           runs, ctx.seed, "G(B_0) >= g(B_0)"));
  const double max_H = *std::max_element(hist.H.begin(), hist.H.end());
  res.gates.push_back(gate("time_in_ball_bounded", max_H <= hist.mean_horizon, max_H, runs, ctx.seed,
                           "max H(B) <= E[Theta_M]"));

  Json prof = Json::array();
  const auto h_profile = radial_profile(hist, hist.h, 1.0, 5.0, 4);
  const auto G_profile = radial_profile(hist, hist.G, 1.0, 5.0, 4);
  const auto H_profile = radial_profile(hist, hist.H, 1.0, 5.0, 4);
  std::string csv = "d_lo,d_hi,g,h,G,H\n";
  for (std::size_t b = 0; b < 4; ++b) {
    prof.push_back({{"d", {1.0 + b, 2.0 + b}}, {"g", profile[b]}, {"h", h_profile[b]}, {"G", G_profile[b]},
                    {"H", H_profile[b]}});
    csv += fmt::format("{},{},{},{},{},{}\n", 1 + b, 2 + b, format_double(profile[b]), format_double(h_profile[b]),
                       format_double(G_profile[b]), format_double(H_profile[b]));
  }
  res.data = {{"r", r},
              {"grid", {{"spacing", grid.spacing}, {"radius", grid.radius}, {"extent", grid.extent}}},
              {"runs", runs},
              {"excursions_per_run", excursions},
              {"mean_theta", hist.mean_theta},
              {"theta_se", hist.theta_se},
              {"origin", {{"g", hist.g[origin]}, {"h", hist.h[origin]}, {"G", hist.G[origin]}, {"H", hist.H[origin]}}},
              {"profile", prof}};
  write_text(ctx.dir / "profile.csv", csv);
  return res;
}

}  // namespace windtree
