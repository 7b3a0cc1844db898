#include "windtree/suites.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <regex>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "suites_internal.hpp"
#include "windtree/errors.hpp"
#include "windtree/parallel.hpp"

namespace windtree {

double HorizonRule::at(double r) const {
  if (fixed) return *fixed;
  return c * std::pow(r, -a);
}

std::string HorizonRule::str() const {
  if (fixed) return format_double(*fixed);
  return fmt::format("{}*r^-{}", format_double(c), format_double(a));
}

HorizonRule HorizonRule::parse(const std::string& text) {
  static const std::regex rule(R"(^\s*(?:([0-9.eE+-]+)\s*\*\s*)?r\s*\^\s*-\s*([0-9.eE+]+)\s*$)");
  std::smatch m;
  HorizonRule h;
  if (std::regex_match(text, m, rule)) {
    h.c = m[1].matched ? std::stod(m[1].str()) : 1.0;
    h.a = std::stod(m[2].str());
    return h;
  }
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ValidationError("T: expected a number or c*r^-a, got '" + text + "'");
  }
  if (used != text.size()) throw ValidationError("T: expected a number or c*r^-a, got '" + text + "'");
  h.fixed = v;
  return h;
}

Json ExperimentConfig::to_json() const {
  Json j;
  j["p"] = {p[0], p[1], p[2]};
  j["r"] = r ? Json(*r) : Json(nullptr);
  j["r_grid"] = r_grid;
  j["T"] = T ? Json(T->str()) : Json(nullptr);
  j["n"] = n ? Json(*n) : Json(nullptr);
  j["scale"] = scale;
  j["seed"] = seed;
  j["suites"] = suites;
  j["intensity_mode"] = intensity == IntensityMode::calibrated ? "calibrated" : "nominal";
  j["adversarial"] = adversarial;
  j["process"] = process;
  j["event"] = event;
  return j;
}

IntensityMode parse_intensity_mode(const std::string& s) {
  if (s == "calibrated") return IntensityMode::calibrated;
  if (s == "nominal" || s == "paper-literal") return IntensityMode::nominal;
  throw ValidationError("intensity-mode: expected calibrated or nominal, got '" + s + "'");
}

void ExperimentConfig::merge_json(const Json& j) {
  auto field = [&](const char* name, auto fn) {
    if (!j.contains(name) || j[name].is_null()) return;
    try {
      fn(j[name]);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string(name) + ": " + e.what());
    }
  };
  field("p", [&](const Json& v) {
    const auto a = v.get<std::vector<double>>();
    if (a.size() != 3) throw ValidationError("p: expected three entries");
    p = ProbabilityVector(a[0], a[1], a[2]);
  });
  field("r", [&](const Json& v) { r = v.get<double>(); });
  field("r_grid", [&](const Json& v) { r_grid = v.get<std::vector<double>>(); });
  field("T", [&](const Json& v) { T = v.is_number() ? HorizonRule{1.0, 0.0, v.get<double>()} : HorizonRule::parse(v.get<std::string>()); });
  field("n", [&](const Json& v) { n = v.get<std::size_t>(); });
  field("scale", [&](const Json& v) { scale = v.get<double>(); });
  field("seed", [&](const Json& v) { seed = v.get<std::uint64_t>(); });
  field("suites", [&](const Json& v) { suites = v.get<std::vector<std::string>>(); });
  field("out", [&](const Json& v) { out = v.get<std::string>(); });
  field("intensity_mode", [&](const Json& v) { intensity = parse_intensity_mode(v.get<std::string>()); });
  field("threads", [&](const Json& v) { threads = v.get<unsigned>(); });
  field("adversarial", [&](const Json& v) { adversarial = v.get<bool>(); });
  field("process", [&](const Json& v) { process = v.get<std::string>(); });
  field("event", [&](const Json& v) { event = v.get<std::string>(); });
}

void ExperimentConfig::validate() const {
  if (r && !(*r > 0.0 && *r < 1.0)) throw ValidationError("r: must lie in (0, 1)");
  std::set<double> seen;
  for (double x : r_grid) {
    if (!(x > 0.0 && x < 1.0)) throw ValidationError("r_grid: values must lie in (0, 1)");
    if (!seen.insert(x).second) throw ValidationError("r_grid: values must be distinct");
  }
  if (!r_grid.empty() && r_grid.size() < 3) throw ValidationError("r_grid: needs at least three values");
  if (T) {
    if (T->fixed && !(*T->fixed > 0.0)) throw ValidationError("T: must be positive");
    if (!T->fixed && !(T->c > 0.0)) throw ValidationError("T: constant c must be positive");
    const bool coupling = std::find(suites.begin(), suites.end(), "coupling-agreement") != suites.end();
    if (coupling && !T->fixed && !(T->a > 0.0 && T->a < 2.0)) {
      throw ValidationError("T: coupling-agreement needs 0 < a < 2");
    }
  }
  if (n && *n < 2) throw ValidationError("n: must be at least 2");
  if (!(scale > 0.0)) throw ValidationError("scale: must be positive");
  if (threads == 0) throw ValidationError("threads: must be at least 1");
  for (const auto& s : suites) {
    const auto& names = suite_names();
    if (s != "all" && std::find(names.begin(), names.end(), s) == names.end()) {
      throw ValidationError("suite: unknown suite '" + s + "'");
    }
  }
  const std::set<std::string> processes{"y", "x", "z", "direct"};
  if (!processes.count(process)) throw ValidationError("process: expected y, x, z or direct");
  (void)parse_rate_event(event == "lin-ind" ? "direct" : event);
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{
      "parity",    "direct-rate", "indirect-rate", "lin-ind",  "coupling-agreement",
      "covariance", "oracle-equivalence", "occupation", "geometry", "structural"};
  return names;
}

std::uint64_t suite_seed(const ExperimentConfig& cfg, const std::string& suite) {
  return hash_keys(cfg.seed, {fnv1a64(suite)});
}

Json test_report_json(const TestReport& t) {
  Json j;
  j["name"] = t.name;
  j["statistic"] = t.statistic;
  j["p_value"] = t.p_value;
  j["n"] = t.n;
  j["seed"] = t.seed;
  j["alpha"] = t.alpha;
  j["pass"] = t.pass;
  j["detail"] = t.detail;
  return j;
}

RateEvent parse_rate_event(const std::string& s) {
  if (s == "direct") return RateEvent::direct;
  if (s == "pairwise") return RateEvent::pairwise;
  if (s == "indirect") return RateEvent::indirect;
  throw ValidationError("event: expected direct, pairwise, indirect or lin-ind, got '" + s + "'");
}

std::string to_string(RateEvent e) {
  switch (e) {
    case RateEvent::direct: return "direct";
    case RateEvent::pairwise: return "pairwise";
    case RateEvent::indirect: return "indirect";
  }
  return "?";
}

namespace detail {

std::size_t sized(const ExperimentConfig& cfg, std::size_t base, std::size_t min) {
  if (cfg.n) return *cfg.n;
  const auto v = static_cast<std::size_t>(std::llround(static_cast<double>(base) * cfg.scale));
  return std::max(min, v);
}

std::size_t scaled(const ExperimentConfig& cfg, std::size_t base, std::size_t min) {
  const auto v = static_cast<std::size_t>(std::llround(static_cast<double>(base) * cfg.scale));
  return std::max(min, v);
}

Velocity random_velocity(const VelocitySet& set, Rng& rng) {
  return set[static_cast<std::uint8_t>(rng.next_u64() & 7U)];
}

TestReport gate(std::string name, bool pass, double statistic, std::size_t n, std::uint64_t seed, std::string detail,
                double p_value, double alpha) {
  TestReport t;
  t.name = std::move(name);
  t.statistic = statistic;
  t.p_value = p_value;
  t.n = n;
  t.seed = seed;
  t.alpha = alpha;
  t.pass = pass;
  t.detail = std::move(detail);
  return t;
}

Json rates_json(const std::vector<RatePoint>& pts) {
  Json a = Json::array();
  for (const auto& p : pts) {
    a.push_back({{"r", p.r}, {"events", p.events}, {"n", p.n}, {"rate", p.rate}, {"ci", {p.ci.lo, p.ci.hi}}});
  }
  return a;
}

Json fit_json(const ScalingFit& f) {
  return {{"slope", f.slope}, {"slope_se", f.slope_se}, {"intercept", f.intercept}, {"r_squared", f.r_squared}};
}

std::string rates_csv(const std::vector<RatePoint>& pts) {
  std::string s = "r,events,n,rate,ci_lo,ci_hi\n";
  for (const auto& p : pts) {
    s += fmt::format("{},{},{},{},{},{}\n", format_double(p.r), p.events, p.n, format_double(p.rate),
                     format_double(p.ci.lo), format_double(p.ci.hi));
  }
  return s;
}

PlotSeries rate_series(const std::string& label, const std::vector<RatePoint>& pts) {
  PlotSeries s{label, {}, {}};
  for (const auto& p : pts) {
    s.x.push_back(p.r);
    s.y.push_back(p.rate);
  }
  return s;
}

TestReport slope_gate(const std::string& name, const ScalingFit& fit, double lo, double hi, std::size_t n,
                      std::uint64_t seed) {
  const bool pass = fit.slope >= lo && fit.slope <= hi;
  return gate(name, pass, fit.slope, n, seed,
              fmt::format("slope {:.4f} (se {:.4f}, R2 {:.4f}) in [{}, {}]", fit.slope, fit.slope_se,
                          fit.r_squared, lo, hi),
              1.0, 0.0);
}

}  // namespace detail

using namespace detail;

namespace {

struct Counts {
  std::uint64_t a = 0;
  std::uint64_t b = 0;
  std::uint64_t n = 0;
};

// Integer tallies over fixed chunks; each chunk owns a derived stream.
template <class F>
Counts tally(std::size_t n, std::size_t first_chunk, std::size_t chunk, unsigned threads, std::uint64_t seed,
             std::uint64_t tag, F&& f) {
  const std::size_t n_chunks = (n + chunk - 1) / chunk;
  std::vector<Counts> parts(n_chunks);
  parallel_chunks(n, chunk, threads, [&](std::size_t c, std::size_t lo, std::size_t hi) {
    Rng rng = Rng::derive(seed, {tag, first_chunk + c});
    Counts k;
    for (std::size_t i = lo; i < hi; ++i) f(rng, k);
    parts[c] = k;
  });
  Counts total;
  for (const auto& p : parts) {
    total.a += p.a;
    total.b += p.b;
    total.n += p.n;
  }
  return total;
}

RatePoint rate_point(double r, std::uint64_t events, std::uint64_t n) {
  RatePoint p;
  p.r = r;
  p.events = events;
  p.n = n;
  p.rate = n ? static_cast<double>(events) / static_cast<double>(n) : 0.0;
  p.ci = wilson_interval(events, n);
  return p;
}

}  // namespace

std::vector<RatePoint> estimate_rates(RateEvent event, const ProbabilityVector& p,
                                      const std::vector<double>& r_grid, std::size_t n,
                                      std::uint64_t seed, unsigned threads) {
  const VelocitySet set(p);
  std::vector<RatePoint> out;
  constexpr std::size_t kChunk = 1 << 14;
  for (std::size_t ri = 0; ri < r_grid.size(); ++ri) {
    const double r = r_grid[ri];
    const std::uint64_t tag = hash_keys(static_cast<std::uint64_t>(event), {ri});
    if (event == RateEvent::direct) {
      const Counts c = tally(n, 0, kChunk, threads, seed, tag, [&](Rng& rng, Counts& k) {
        const FlightPath f = sample_flight_collisions(set, random_velocity(set, rng), 3, r, rng);
        k.a += detect_direct_mismatch(f, 3).any() ? 1 : 0;
        ++k.n;
      });
      out.push_back(rate_point(r, c.a, c.n));
    } else if (event == RateEvent::pairwise) {
      // Batches of n, continued until 100 joint events or 128 batches.
      Counts total;
      const std::size_t per_batch_chunks = (n + kChunk - 1) / kChunk;
      for (std::size_t b = 0; b < 128 && (total.a < 100 || b == 0); ++b) {
        const Counts c = tally(n, b * per_batch_chunks, kChunk, threads, seed, tag, [&](Rng& rng, Counts& k) {
          const FlightPath f = sample_flight_collisions(set, random_velocity(set, rng), 4, r, rng);
          const bool e3 = detect_direct_mismatch(f, 3).any();
          const bool e4 = detect_direct_mismatch(f, 4).any();
          k.a += (e3 && e4) ? 1 : 0;
          k.b += e3 ? 1 : 0;
          ++k.n;
        });
        total.a += c.a;
        total.b += c.b;
        total.n += c.n;
      }
      out.push_back(rate_point(r, total.a, total.n));
    } else {
      constexpr std::size_t kJ = 16;
      const Counts c = tally(n, 0, 1 << 10, threads, seed, tag, [&](Rng& rng, Counts& k) {
        const FlightPath f = sample_flight_collisions(set, random_velocity(set, rng), kJ, r, rng);
        for (std::size_t j = 4; j <= kJ; ++j) {
          k.a += detect_indirect_mismatch(f, j).any() ? 1 : 0;
          ++k.n;
        }
      });
      out.push_back(rate_point(r, c.a, c.n));
    }
  }
  return out;
}

ScalingFit fit_rates(const std::vector<RatePoint>& points) {
  std::vector<std::pair<double, double>> pairs;
  for (const auto& p : points) pairs.emplace_back(p.r, p.rate);
  ScalingFit fit;
  // A zero count at small samples leaves the slope undefined (NaN), which
  // fails every slope gate instead of aborting the suite.
  const bool zero = std::any_of(points.begin(), points.end(), [](const RatePoint& p) { return !(p.rate > 0.0); });
  if (zero) {
    for (const auto& p : points) {
      fit.r.push_back(p.r);
      fit.rate.push_back(p.rate);
    }
    fit.slope = fit.intercept = fit.slope_se = fit.r_squared = std::numeric_limits<double>::quiet_NaN();
  } else {
    fit = fit_log_slope(pairs);
  }
  for (const auto& p : points) fit.ci.push_back(p.ci);
  return fit;
}

SuiteResult run_suite(const std::string& name, const ExperimentConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  SuiteContext ctx{cfg, name, suite_seed(cfg, name), cfg.out / name, VelocitySet(cfg.p)};
  std::filesystem::create_directories(ctx.dir);
  SuiteResult res;
  if (name == "parity") res = suite_parity(ctx);
  else if (name == "direct-rate") res = suite_direct_rate(ctx);
  else if (name == "indirect-rate") res = suite_indirect_rate(ctx);
  else if (name == "lin-ind") res = suite_lin_ind(ctx);
  else if (name == "coupling-agreement") res = suite_coupling_agreement(ctx);
  else if (name == "covariance") res = suite_covariance(ctx);
  else if (name == "oracle-equivalence") res = suite_oracle_equivalence(ctx);
  else if (name == "occupation") res = suite_occupation(ctx);
  else if (name == "geometry") res = suite_geometry(ctx);
  else if (name == "structural") res = suite_structural(ctx);
  else throw ValidationError("suite: unknown suite '" + name + "'");
  res.name = name;
  res.seed = ctx.seed;
  res.pass = std::all_of(res.gates.begin(), res.gates.end(), [](const TestReport& t) { return t.pass; });
  Json report;
  report["suite"] = name;
  report["seed"] = ctx.seed;
  report["pass"] = res.pass;
  report["alpha"] = res.alpha;
  report["adversarial"] = cfg.adversarial;
  report["gates"] = Json::array();
  for (const auto& g : res.gates) report["gates"].push_back(test_report_json(g));
  report["data"] = res.data;
  write_json(ctx.dir / "report.json", report);
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

RunManifest run_suites(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<std::string> selected;
  for (const auto& s : cfg.suites) {
    if (s == "all") {
      selected = suite_names();
      break;
    }
    selected.push_back(s);
  }
  std::filesystem::create_directories(cfg.out);
  RunManifest m;
  m.pass = true;
  Json suites = Json::array();
  Json timing;
  for (const auto& s : selected) {
    const SuiteResult r = run_suite(s, cfg);
    m.pass = m.pass && r.pass;
    Json failed = Json::array();
    for (const auto& g : r.gates)
      if (!g.pass) failed.push_back(g.name);
    suites.push_back({{"name", s}, {"pass", r.pass}, {"seed", r.seed}, {"gates", r.gates.size()}, {"failed", failed}});
    timing[s] = r.seconds;
  }
  const Json config = cfg.to_json();
  m.json["version"] = kVersion;
  m.json["config"] = config;
  m.json["config_hash"] = fmt::format("{:016x}", fnv1a64(config.dump()));
  m.json["master_seed"] = cfg.seed;
  m.json["suites"] = suites;
  m.json["pass"] = m.pass;
  write_json(cfg.out / "manifest.json", m.json);
  Json t;
  t["threads"] = cfg.threads;
  t["seconds"] = timing;
  write_json(cfg.out / "timing.json", t);
  return m;
}

}  // namespace windtree
