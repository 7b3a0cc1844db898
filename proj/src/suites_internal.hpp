#pragma once

#include <filesystem>
#include <string>

#include "windtree/coupling.hpp"
#include "windtree/suites.hpp"

namespace windtree {

IntensityMode parse_intensity_mode(const std::string& s);

struct SuiteContext {
  const ExperimentConfig& cfg;
  std::string name;
  std::uint64_t seed;
  std::filesystem::path dir;
  VelocitySet set;
};

SuiteResult suite_parity(const SuiteContext& ctx);
SuiteResult suite_direct_rate(const SuiteContext& ctx);
SuiteResult suite_indirect_rate(const SuiteContext& ctx);
SuiteResult suite_lin_ind(const SuiteContext& ctx);
SuiteResult suite_coupling_agreement(const SuiteContext& ctx);
SuiteResult suite_covariance(const SuiteContext& ctx);
SuiteResult suite_oracle_equivalence(const SuiteContext& ctx);
SuiteResult suite_occupation(const SuiteContext& ctx);
SuiteResult suite_geometry(const SuiteContext& ctx);
SuiteResult suite_structural(const SuiteContext& ctx);

namespace detail {

// Main sample size: cfg.n if given, else base * cfg.scale (at least min).
std::size_t sized(const ExperimentConfig& cfg, std::size_t base, std::size_t min);
// Secondary sample sizes follow the scale only.
std::size_t scaled(const ExperimentConfig& cfg, std::size_t base, std::size_t min);

Velocity random_velocity(const VelocitySet& set, Rng& rng);

TestReport gate(std::string name, bool pass, double statistic, std::size_t n, std::uint64_t seed,
                std::string detail, double p_value = 1.0, double alpha = 0.0);
TestReport slope_gate(const std::string& name, const ScalingFit& fit, double lo, double hi, std::size_t n,
                      std::uint64_t seed);

Json rates_json(const std::vector<RatePoint>& pts);
Json fit_json(const ScalingFit& f);
std::string rates_csv(const std::vector<RatePoint>& pts);
PlotSeries rate_series(const std::string& label, const std::vector<RatePoint>& pts);

}  // namespace detail

}  // namespace windtree
