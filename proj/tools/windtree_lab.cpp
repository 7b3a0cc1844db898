// windtree-lab: simulation, coupling and verification runner.
//
// Exit codes: 0 when every selected gate passes, 1 on a gate failure,
// 2 on a usage or configuration error, 3 on an internal error.

#include <fstream>
#include <iostream>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "windtree/coupling.hpp"
#include "windtree/errors.hpp"
#include "windtree/suites.hpp"

using namespace windtree;

namespace {

constexpr int kGateFailure = 1;
constexpr int kUsageError = 2;
constexpr int kInternalError = 3;

struct Flags {
  std::string config;
  std::string p, r, T, n, seed, out, intensity, threads, scale, process, event;
  std::vector<std::string> suites;
  bool adversarial = false;
};

std::vector<double> parse_list(const std::string& field, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError(fmt::format("{}: '{}' is not a number", field, item));
    }
  }
  if (out.empty()) throw ValidationError(field + ": empty value");
  return out;
}

template <class T>
T parse_integer(const std::string& field, const std::string& text) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(text, &used);
    if (used != text.size() || text.front() == '-') throw std::invalid_argument(text);
    return static_cast<T>(v);
  } catch (const std::exception&) {
    throw ValidationError(fmt::format("{}: '{}' is not a non-negative integer", field, text));
  }
}

// File fields first, then flags on top.
ExperimentConfig build_config(const Flags& f) {
  ExperimentConfig cfg;
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) throw ValidationError("config: cannot open " + f.config);
    Json j;
    try {
      j = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("config: ") + e.what());
    }
    cfg.merge_json(j);
  }
  Json j = Json::object();
  if (!f.p.empty()) {
    const auto v = parse_list("p", f.p);
    if (v.size() != 3) throw ValidationError("p: expected three comma-separated values");
    j["p"] = v;
  }
  if (!f.r.empty()) {
    const auto v = parse_list("r", f.r);
    if (v.size() == 1) j["r"] = v[0];
    else j["r_grid"] = v;
  }
  if (!f.T.empty()) j["T"] = f.T;
  if (!f.n.empty()) j["n"] = parse_integer<std::size_t>("n", f.n);
  if (!f.seed.empty()) j["seed"] = parse_integer<std::uint64_t>("seed", f.seed);
  if (!f.out.empty()) j["out"] = f.out;
  if (!f.intensity.empty()) j["intensity_mode"] = f.intensity;
  if (!f.threads.empty()) j["threads"] = parse_integer<unsigned>("threads", f.threads);
  if (!f.scale.empty()) j["scale"] = parse_list("scale", f.scale).at(0);
  if (!f.process.empty()) j["process"] = f.process;
  if (!f.event.empty()) j["event"] = f.event;
  if (!f.suites.empty()) {
    std::vector<std::string> s;
    for (const auto& item : f.suites) {
      std::stringstream ss(item);
      std::string part;
      while (std::getline(ss, part, ',')) s.push_back(part);
    }
    j["suites"] = s;
  }
  if (f.adversarial) j["adversarial"] = true;
  cfg.merge_json(j);
  return cfg;
}

void add_common(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "JSON config file; flags override its fields");
  app->add_option("--p", f.p, "probability vector p1,p2,p3");
  app->add_option("--r", f.r, "scatterer size, or a comma-separated r-grid");
  app->add_option("--T", f.T, "horizon: a number or a rule such as r^-1.5 or 2*r^-1");
  app->add_option("--n", f.n, "main replicate count");
  app->add_option("--seed", f.seed, "master seed");
  app->add_option("--out", f.out, "output directory");
  app->add_option("--intensity-mode", f.intensity, "calibrated | nominal (alias paper-literal)");
  app->add_option("--threads", f.threads, "worker threads");
  app->add_option("--scale", f.scale, "multiplier on default sample sizes");
}

double single_r(const ExperimentConfig& cfg, double fallback) { return cfg.r.value_or(fallback); }

double horizon(const ExperimentConfig& cfg, double r, double fallback) { return cfg.T ? cfg.T->at(r) : fallback; }

void write_trace(const std::filesystem::path& path, const std::vector<TraceRow>& rows, bool ids) {
  std::ostringstream os;
  write_trace_csv(os, rows, ids);
  write_text(path, os.str());
}

int cmd_simulate(ExperimentConfig cfg) {
  cfg.validate();
  const VelocitySet set(cfg.p);
  const Velocity v0 = set[0];
  const double r = single_r(cfg, 0.1);
  const double T = horizon(cfg, r, 100.0);
  Json header = trace_header(cfg.p, r, cfg.seed, T, cfg.process, cfg.intensity);
  const auto dir = cfg.out;
  if (cfg.process == "y") {
    Rng rng = Rng::derive(cfg.seed, {fnv1a64("simulate")});
    const FlightPath y = sample_flight(set, v0, T, r, rng);
    write_trace(dir / "trace_y.csv", trace_of(y), false);
  } else if (cfg.process == "x" || cfg.process == "z") {
    Rng rng = Rng::derive(cfg.seed, {fnv1a64("couple")});
    const CoupledTriple t = build_coupled(set, v0, r, T, rng);
    const ProcessRecord& rec = cfg.process == "x" ? t.X : t.Z;
    write_trace(dir / fmt::format("trace_{}.csv", cfg.process), trace_of(rec, T), false);
    std::ostringstream ev;
    write_events_jsonl(ev, t.log);
    write_text(dir / "events.jsonl", ev.str());
  } else {
    std::size_t rejections = 0;
    for (std::uint64_t a = 0;; ++a) {
      const PoissonEnvironment env =
          make_environment(set, v0, r, cfg.intensity, hash_keys(cfg.seed, {fnv1a64("direct"), a}), true);
      const auto d = simulate_direct(env, v0, T);
      if (!d) {
        ++rejections;
        continue;
      }
      write_trace(dir / "trace_direct.csv", trace_of(*d), true);
      break;
    }
    header["origin_rejections"] = rejections;
  }
  write_json(dir / "header.json", header);
  std::cout << fmt::format("wrote {} trace to {}\n", cfg.process, dir.string());
  return 0;
}

int cmd_couple(ExperimentConfig cfg) {
  cfg.validate();
  const VelocitySet set(cfg.p);
  const double r = single_r(cfg, 0.1);
  const double T = horizon(cfg, r, 100.0);
  Rng rng = Rng::derive(cfg.seed, {fnv1a64("couple")});
  const CoupledTriple t = build_coupled(set, set[0], r, T, rng);
  const auto dir = cfg.out;
  write_trace(dir / "trace_x.csv", trace_of(t.X, T), false);
  write_trace(dir / "trace_y.csv", trace_of(t.Y), false);
  write_trace(dir / "trace_z.csv", trace_of(t.Z, T), false);
  std::ostringstream ev;
  write_events_jsonl(ev, t.log);
  write_text(dir / "events.jsonl", ev.str());
  Json header = trace_header(cfg.p, r, cfg.seed, T, "coupled", cfg.intensity);
  const auto first = t.log.first_event();
  header["first_event"] = first ? Json(*first) : Json(nullptr);
  header["events"] = t.log.events.size();
  write_json(dir / "header.json", header);
  std::cout << fmt::format("wrote coupled traces to {} ({} events)\n", dir.string(), t.log.events.size());
  return 0;
}

int print_manifest(const Json& m) {
  for (const auto& s : m["suites"]) {
    std::string failed;
    for (const auto& g : s["failed"]) failed += " " + g.get<std::string>();
    std::cout << fmt::format("{:<20} {}{}\n", s["name"].get<std::string>(), s["pass"].get<bool>() ? "PASS" : "FAIL",
                             failed.empty() ? "" : " (failed:" + failed + ")");
  }
  const bool pass = m["pass"].get<bool>();
  std::cout << (pass ? "all gates passed\n" : "gate failures\n");
  return pass ? 0 : kGateFailure;
}

int cmd_verify(ExperimentConfig cfg) {
  if (cfg.suites.empty()) cfg.suites = {"all"};
  return print_manifest(run_suites(cfg).json);
}

int cmd_scaling(ExperimentConfig cfg) {
  if (cfg.event == "direct") cfg.suites = {"direct-rate"};
  else if (cfg.event == "pairwise" || cfg.event == "indirect") cfg.suites = {"indirect-rate"};
  else if (cfg.event == "lin-ind") cfg.suites = {"lin-ind"};
  else throw ValidationError("event: expected direct, pairwise, indirect or lin-ind");
  const RunManifest m = run_suites(cfg);
  const auto report = Json::parse(std::ifstream(cfg.out / cfg.suites[0] / "report.json"));
  for (const auto& g : report["gates"]) {
    std::cout << fmt::format("{:<40} {} statistic={}\n", g["name"].get<std::string>(),
                             g["pass"].get<bool>() ? "PASS" : "FAIL", format_double(g["statistic"].get<double>()));
  }
  return m.pass ? 0 : kGateFailure;
}

int cmd_cov(ExperimentConfig cfg) {
  cfg.suites = {"covariance"};
  return print_manifest(run_suites(cfg).json);
}

int cmd_report(const ExperimentConfig& cfg) {
  const auto path = cfg.out / "manifest.json";
  std::ifstream in(path);
  if (!in) throw ValidationError("out: no manifest.json in " + cfg.out.string());
  return print_manifest(Json::parse(in));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wind-tree Lorentz gas simulation and coupling verification"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Flags f;
  auto* simulate = app.add_subcommand("simulate", "emit one trajectory (y, x, z or direct)");
  auto* couple = app.add_subcommand("couple", "emit the coupled X, Y, Z trajectories and event log");
  auto* verify = app.add_subcommand("verify", "run verification suites and write a manifest");
  auto* scaling = app.add_subcommand("scaling", "mismatch-rate scaling over an r-grid");
  auto* cov = app.add_subcommand("cov", "endpoint covariance and Gaussianity");
  auto* report = app.add_subcommand("report", "summarize an existing manifest");
  for (auto* sub : {simulate, couple, verify, scaling, cov, report}) add_common(sub, f);
  simulate->add_option("--process", f.process, "y | x | z | direct");
  verify->add_option("--suite", f.suites, "suite names (comma-separated) or all");
  verify->add_flag("--adversarial", f.adversarial, "feed each suite its control input; gates should fail");
  scaling->add_option("--event", f.event, "direct | pairwise | indirect | lin-ind");
  scaling->add_flag("--adversarial", f.adversarial, "feed the suite its control input");
  cov->add_flag("--adversarial", f.adversarial, "feed the suite its control input");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }
  try {
    const ExperimentConfig cfg = build_config(f);
    if (simulate->parsed()) return cmd_simulate(cfg);
    if (couple->parsed()) return cmd_couple(cfg);
    if (verify->parsed()) return cmd_verify(cfg);
    if (scaling->parsed()) return cmd_scaling(cfg);
    if (cov->parsed()) return cmd_cov(cfg);
    return cmd_report(cfg);
  } catch (const ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInternalError;
  }
}
