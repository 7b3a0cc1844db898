#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "windtree/geometry.hpp"

namespace windtree {

struct TestReport {
  std::string name;
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double alpha = 0.01;
  bool pass = false;
  std::string detail;
};

double normal_cdf(double x);
double exponential_cdf(double x);

// Asymptotic Kolmogorov tail with the Stephens small-sample correction.
double kolmogorov_pvalue(double d, double n_eff);

struct KsResult {
  double d = 0.0;
  double p_value = 1.0;
};

KsResult ks_one_sample(std::vector<double> x, const std::function<double(double)>& cdf);
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

struct EnergyTestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t permutations = 0;
};

// Two-sample energy distance with a permutation p-value; permutation k
// uses a stream derived from (seed, k), so the result is thread-count free.
EnergyTestResult energy_test(const std::vector<Vec3>& a, const std::vector<Vec3>& b, std::size_t permutations,
                             std::uint64_t seed, unsigned threads = 1);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

Interval wilson_interval(std::uint64_t successes, std::uint64_t n, double z = 1.959963984540054);

struct ScalingFit {
  std::vector<double> r;
  std::vector<double> rate;
  std::vector<Interval> ci;
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double r_squared = 0.0;
};

// Least squares of log(rate) on log(r). Throws DomainError for rate <= 0.
ScalingFit fit_log_slope(const std::vector<std::pair<double, double>>& points);

struct TailFit {
  std::vector<double> s;
  std::vector<double> survival;
  double slope = 0.0;
  double r_squared = 0.0;
};

// Log-linear fit of the empirical survival P(X > s) over s where at least
// `min_exceed` samples exceed s.
TailFit fit_tail(const std::vector<double>& samples, std::size_t points = 12, std::size_t min_exceed = 50);

double pearson(const std::vector<double>& x, const std::vector<double>& y);

struct Moments3 {
  std::size_t n = 0;
  Vec3 mean{};
  std::array<std::array<double, 3>, 3> cov{};  // unbiased
  std::array<double, 3> var_se{};              // standard error of each diagonal entry
  std::array<std::array<double, 3>, 3> cov_se{};
};

Moments3 moments(const std::vector<Vec3>& x);

struct CovarianceReport {
  double T = 0.0;
  std::size_t n = 0;
  Moments3 empirical;                  // of endpoint / sqrt(T)
  std::array<double, 3> derived{};     // v_i^2 / p_i
  std::array<double, 3> bare{};          // v_i^2
  std::array<double, 3> rel_dev_derived{};
  std::array<double, 3> rel_dev_bare{};
  std::array<double, 3> offdiag_z{};   // (12, 13, 23) entries over their SE
  std::array<double, 3> ks_d{};
  std::array<double, 3> ks_p{};
};

CovarianceReport endpoint_covariance(const std::vector<Vec3>& endpoints, double T, const ProbabilityVector& p);

// Per-component KS of endpoints against a normal with fitted mean/variance.
std::array<KsResult, 3> gaussianity(const std::vector<Vec3>& endpoints);

// Three-segment probability of the lin-ind estimate.
struct LinIndSetup {
  Vec3 U1, U2, U3, s;
  double r = 0.0;
};

LinIndSetup make_lin_ind_setup(const Velocity& U1, const Velocity& U2, const Velocity& U3, const Vec3& s, double r);
bool lin_ind_hit(const LinIndSetup& q, double xi1, double xi2, double xi3);
// P(hit | xi2, xi3), integrating xi1 over the interval left after
// eliminating t from the slab inequalities.
double lin_ind_conditional(const LinIndSetup& q, double xi2, double xi3);

struct LinIndReport {
  std::size_t n = 0;
  double p_geometric = 0.0;
  double se_geometric = 0.0;
  double p_slab = 0.0;
  double se_slab = 0.0;
  double diff = 0.0;
  double se_diff = 0.0;
  bool agree = false;
};

LinIndReport lin_ind_probability(const LinIndSetup& q, std::size_t n, std::uint64_t seed, unsigned threads = 1);

}  // namespace windtree
