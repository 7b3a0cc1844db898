#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "windtree/environment.hpp"
#include "windtree/io.hpp"
#include "windtree/stats.hpp"

namespace windtree {

inline constexpr const char* kVersion = "1.0.0";

/// Horizon rule T = c * r^(-a), or a fixed T.
struct HorizonRule {
  double c = 1.0;
  double a = 0.0;
  std::optional<double> fixed;

  double at(double r) const;
  std::string str() const;
  // Accepts "1000", "r^-1.5", "2*r^-1" and "2.5*r^-1.5".
  static HorizonRule parse(const std::string& text);
};

struct ExperimentConfig {
  ProbabilityVector p{0.5, 0.3, 0.2};
  std::optional<double> r;        // overrides a suite's single r
  std::vector<double> r_grid;     // overrides a suite's r-grid
  std::optional<HorizonRule> T;   // overrides a suite's horizon
  std::optional<std::size_t> n;   // overrides a suite's main sample size
  double scale = 1.0;             // multiplies default sample sizes
  std::uint64_t seed = 1;
  std::vector<std::string> suites;
  std::filesystem::path out = "windtree-out";
  IntensityMode intensity = IntensityMode::calibrated;
  unsigned threads = 1;
  // Runs each suite's adversarial control in place of the real input, so
  // the suite is expected to fail.
  bool adversarial = false;
  std::string process = "y";
  std::string event = "direct";

  Json to_json() const;
  // Fields absent from j keep their current values.
  void merge_json(const Json& j);
  // Throws ValidationError with a field name on bad input.
  void validate() const;
};

struct SuiteResult {
  std::string name;
  std::uint64_t seed = 0;
  bool pass = false;
  double alpha = 0.01;  // per-gate level after Bonferroni
  std::vector<TestReport> gates;
  Json data;
  double seconds = 0.0;
};

const std::vector<std::string>& suite_names();
std::uint64_t suite_seed(const ExperimentConfig& cfg, const std::string& suite);

// Runs one suite and writes its artifacts under cfg.out / name.
SuiteResult run_suite(const std::string& name, const ExperimentConfig& cfg);

struct RunManifest {
  Json json;
  bool pass = false;
};

// Runs every selected suite; writes manifest.json and timing.json.
RunManifest run_suites(const ExperimentConfig& cfg);

Json test_report_json(const TestReport& t);

/// Empirical rate of one mismatch event on an r-grid.
struct RatePoint {
  double r = 0.0;
  std::uint64_t events = 0;
  std::uint64_t n = 0;
  double rate = 0.0;
  Interval ci;
};

enum class RateEvent { direct, pairwise, indirect };

RateEvent parse_rate_event(const std::string& s);
std::string to_string(RateEvent e);

// direct: E[eta_j] on independent windows; pairwise: E[eta_j eta_{j+1}],
// sampled in batches until 100 events (or the cap); indirect: E[eta°_j]
// averaged over j = 4..16.
std::vector<RatePoint> estimate_rates(RateEvent event, const ProbabilityVector& p,
                                      const std::vector<double>& r_grid, std::size_t n,
                                      std::uint64_t seed, unsigned threads);

ScalingFit fit_rates(const std::vector<RatePoint>& points);

}  // namespace windtree
