#include "windtree/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "windtree/errors.hpp"
#include "windtree/parallel.hpp"
#include "windtree/rng.hpp"

namespace windtree {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double exponential_cdf(double x) { return x <= 0.0 ? 0.0 : -std::expm1(-x); }

double kolmogorov_pvalue(double d, double n_eff) {
  const double sn = std::sqrt(n_eff);
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    // Jacobi-theta form converges fast for small lambda.
    const double pi = 3.14159265358979323846;
    double cdf = 0.0;
    for (int k = 1; k <= 20; ++k) {
      const double m = 2.0 * k - 1.0;
      cdf += std::exp(-m * m * pi * pi / (8.0 * lambda * lambda));
    }
    cdf *= std::sqrt(2.0 * pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double q = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    q += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(q, 0.0, 1.0);
}

KsResult ks_one_sample(std::vector<double> x, const std::function<double(double)>& cdf) {
  if (x.empty()) throw DomainError("empty sample");
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return {d, kolmogorov_pvalue(d, n)};
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DomainError("empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double t = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= t) ++i;
    while (j < b.size() && b[j] <= t) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return {d, kolmogorov_pvalue(d, na * nb / (na + nb))};
}

namespace {

// Row i of the packed upper triangle holds d(i, j) for j > i.
std::size_t row_offset(std::size_t i, std::size_t n) { return i * (2 * n - i - 1) / 2; }

// sum_{j > i} d(i, j) m_j with eight fixed partial sums, so the result does
// not depend on how the loop is scheduled.
double masked_row(const float* row, const float* mask, std::size_t len) {
  std::array<double, 8> acc{};
  std::size_t j = 0;
  for (; j + 8 <= len; j += 8)
    for (std::size_t l = 0; l < 8; ++l) acc[l] += static_cast<double>(row[j + l] * mask[j + l]);
  for (; j < len; ++j) acc[0] += static_cast<double>(row[j] * mask[j]);
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

}  // namespace

EnergyTestResult energy_test(const std::vector<Vec3>& a, const std::vector<Vec3>& b, std::size_t permutations,
                             std::uint64_t seed, unsigned threads) {
  if (a.size() < 2 || b.size() < 2) throw DomainError("energy test needs at least two points per sample");
  std::vector<Vec3> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::size_t n = pooled.size();
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  std::vector<float> dist(n * (n - 1) / 2);
  std::vector<double> row_sum(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    float* row = dist.data() + row_offset(i, n);
    double acc = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const float d = static_cast<float>(norm(pooled[i] - pooled[j]));
      row[j - i - 1] = d;
      acc += d;
    }
    row_sum[i] = acc;
    total += acc;
  }
  // Statistic for a labelling; mask[i] = 1 for members of the first sample.
  auto statistic = [&](const std::vector<float>& mask) {
    double saa = 0.0;
    double sbb = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double in_a = masked_row(dist.data() + row_offset(i, n), mask.data() + i + 1, n - i - 1);
      if (mask[i] != 0.0F) {
        saa += in_a;
      } else {
        sbb += row_sum[i] - in_a;
      }
    }
    const double sab = total - saa - sbb;
    const double fa = static_cast<double>(na);
    const double fb = static_cast<double>(nb);
    return (2.0 * sab / (fa * fb) - 2.0 * saa / (fa * fa) - 2.0 * sbb / (fb * fb)) * fa * fb / (fa + fb);
  };
  std::vector<float> mask(n, 0.0F);
  std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(na), 1.0F);
  EnergyTestResult out;
  out.statistic = statistic(mask);
  out.permutations = permutations;
  std::vector<std::uint8_t> exceed(permutations, 0);
  parallel_chunks(permutations, 1, threads, [&](std::size_t, std::size_t lo, std::size_t hi) {
    std::vector<std::size_t> perm(n);
    std::vector<float> m(n);
    for (std::size_t k = lo; k < hi; ++k) {
      Rng rng = Rng::derive(seed, {0xe7e7ULL, k});
      std::iota(perm.begin(), perm.end(), 0);
      for (std::size_t i = n - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(rng.next_u64() % (i + 1));
        std::swap(perm[i], perm[j]);
      }
      std::fill(m.begin(), m.end(), 0.0F);
      for (std::size_t i = 0; i < na; ++i) m[perm[i]] = 1.0F;
      exceed[k] = statistic(m) >= out.statistic ? 1 : 0;
    }
  });
  const auto count = static_cast<double>(std::accumulate(exceed.begin(), exceed.end(), std::size_t{0}));
  out.p_value = (1.0 + count) / (1.0 + static_cast<double>(permutations));
  return out;
}

Interval wilson_interval(std::uint64_t successes, std::uint64_t n, double z) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

namespace {
struct Ols {
  double slope, intercept, slope_se, r2;
};

Ols ols(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  Ols o{};
  o.slope = sxy / sxx;
  o.intercept = my - o.slope * mx;
  const double sse = std::max(0.0, syy - o.slope * sxy);
  o.slope_se = x.size() > 2 ? std::sqrt(sse / (n - 2.0) / sxx) : 0.0;
  o.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  return o;
}
}  // namespace

ScalingFit fit_log_slope(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3) throw DomainError("slope fit needs at least three points");
  ScalingFit fit;
  std::vector<double> lx;
  std::vector<double> ly;
  for (const auto& [r, rate] : points) {
    if (!(r > 0.0)) throw DomainError("r must be positive");
    if (!(rate > 0.0)) throw DomainError("rate must be positive for a log-log fit");
    if (std::find(fit.r.begin(), fit.r.end(), r) != fit.r.end()) throw DomainError("r values must be distinct");
    fit.r.push_back(r);
    fit.rate.push_back(rate);
    lx.push_back(std::log(r));
    ly.push_back(std::log(rate));
  }
  const Ols o = ols(lx, ly);
  fit.slope = o.slope;
  fit.intercept = o.intercept;
  fit.slope_se = o.slope_se;
  fit.r_squared = o.r2;
  return fit;
}

TailFit fit_tail(const std::vector<double>& samples, std::size_t points, std::size_t min_exceed) {
  if (samples.empty()) throw DomainError("empty sample");
  std::vector<double> sorted(samples);
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  // Largest s with at least min_exceed exceedances.
  const std::size_t cut = sorted.size() > min_exceed ? sorted.size() - min_exceed : 0;
  const double s_max = sorted[cut];
  const double s_min = sorted[sorted.size() / 2];
  TailFit fit;
  std::vector<double> ys;
  for (std::size_t k = 0; k < points; ++k) {
    const double s = s_min + (s_max - s_min) * static_cast<double>(k) / static_cast<double>(points - 1);
    const auto above = static_cast<double>(sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), s));
    if (above <= 0.0) continue;
    if (!fit.s.empty() && s == fit.s.back()) continue;
    fit.s.push_back(s);
    fit.survival.push_back(above / n);
    ys.push_back(std::log(above / n));
  }
  if (fit.s.size() < 3) throw DomainError("tail too short to fit");
  const Ols o = ols(fit.s, ys);
  fit.slope = o.slope;
  fit.r_squared = o.r2;
  return fit;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

Moments3 moments(const std::vector<Vec3>& x) {
  Moments3 m;
  m.n = x.size();
  if (m.n < 2) throw DomainError("moments need at least two points");
  const double n = static_cast<double>(m.n);
  for (const auto& v : x) m.mean = m.mean + v;
  m.mean = (1.0 / n) * m.mean;
  std::array<std::array<double, 3>, 3> m4{};
  for (const auto& v : x) {
    const Vec3 d = v - m.mean;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) {
        m.cov[i][j] += d[i] * d[j];
        m4[i][j] += d[i] * d[i] * d[j] * d[j];
      }
  }
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      const double biased = m.cov[i][j] / n;
      m.cov[i][j] /= (n - 1.0);
      m.cov_se[i][j] = std::sqrt(std::max(0.0, m4[i][j] / n - biased * biased) / n);
    }
  for (std::size_t i = 0; i < 3; ++i) m.var_se[i] = m.cov_se[i][i];
  return m;
}

CovarianceReport endpoint_covariance(const std::vector<Vec3>& endpoints, double T, const ProbabilityVector& p) {
  CovarianceReport rep;
  rep.T = T;
  rep.n = endpoints.size();
  std::vector<Vec3> scaled;
  scaled.reserve(endpoints.size());
  const double s = 1.0 / std::sqrt(T);
  for (const auto& e : endpoints) scaled.push_back(s * e);
  rep.empirical = moments(scaled);
  for (int i = 0; i < 3; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double v = p[i] / p.norm();
    rep.derived[k] = v * v / p[i];
    rep.bare[k] = v * v;
    rep.rel_dev_derived[k] = rep.empirical.cov[k][k] / rep.derived[k] - 1.0;
    rep.rel_dev_bare[k] = rep.empirical.cov[k][k] / rep.bare[k] - 1.0;
  }
  const std::array<std::pair<std::size_t, std::size_t>, 3> off{{{0, 1}, {0, 2}, {1, 2}}};
  for (std::size_t q = 0; q < 3; ++q) {
    const auto [i, j] = off[q];
    rep.offdiag_z[q] = rep.empirical.cov[i][j] / rep.empirical.cov_se[i][j];
  }
  const auto ks = gaussianity(scaled);
  for (std::size_t i = 0; i < 3; ++i) {
    rep.ks_d[i] = ks[i].d;
    rep.ks_p[i] = ks[i].p_value;
  }
  return rep;
}

std::array<KsResult, 3> gaussianity(const std::vector<Vec3>& endpoints) {
  const Moments3 m = moments(endpoints);
  std::array<KsResult, 3> out;
  for (std::size_t i = 0; i < 3; ++i) {
    std::vector<double> comp;
    comp.reserve(endpoints.size());
    for (const auto& e : endpoints) comp.push_back(e[i]);
    const double mu = m.mean[i];
    const double sd = std::sqrt(m.cov[i][i]);
    out[i] = ks_one_sample(std::move(comp), [=](double x) { return normal_cdf((x - mu) / sd); });
  }
  return out;
}

LinIndSetup make_lin_ind_setup(const Velocity& U1, const Velocity& U2, const Velocity& U3, const Vec3& s, double r) {
  const Vec3 a = U1.vec();
  const Vec3 b = U2.vec();
  const Vec3 c = U3.vec();
  const double det = a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) +
                     a[2] * (b[0] * c[1] - b[1] * c[0]);
  if (std::fabs(det) < 1e-12) throw DomainError("velocities are linearly dependent");
  return {a, b, c, s, r};
}

bool lin_ind_hit(const LinIndSetup& q, double xi1, double xi2, double xi3) {
  const Vec3 start = xi1 * q.U1 + xi2 * q.U2;
  return segment_hits_open_cube(start, q.U3, xi3, {q.s, 0.5 * q.r}, 0.0);
}

double lin_ind_conditional(const LinIndSetup& q, double xi2, double xi3) {
  // Constraints on t of the form alpha + beta * xi1.
  struct Lin {
    double alpha, beta;
  };
  const double h = 0.5 * q.r;
  std::vector<Lin> lower{{0.0, 0.0}};
  std::vector<Lin> upper{{xi3, 0.0}};
  for (std::size_t i = 0; i < 3; ++i) {
    const double a = q.U1[i];
    const double c = q.U3[i];
    const double lo = (q.s[i] - h - xi2 * q.U2[i]) / c;
    const double hi = (q.s[i] + h - xi2 * q.U2[i]) / c;
    const Lin l1{lo, -a / c};
    const Lin l2{hi, -a / c};
    if (c > 0.0) {
      lower.push_back(l1);
      upper.push_back(l2);
    } else {
      lower.push_back(l2);
      upper.push_back(l1);
    }
  }
  double x_lo = 0.0;
  double x_hi = std::numeric_limits<double>::infinity();
  for (const auto& l : lower) {
    for (const auto& u : upper) {
      // Need l(x) < u(x):  (l.alpha - u.alpha) + (l.beta - u.beta) x < 0.
      const double c0 = l.alpha - u.alpha;
      const double c1 = l.beta - u.beta;
      if (c1 == 0.0) {
        if (!(c0 < 0.0)) return 0.0;
      } else if (c1 > 0.0) {
        x_hi = std::min(x_hi, -c0 / c1);
      } else {
        x_lo = std::max(x_lo, -c0 / c1);
      }
    }
  }
  if (!(x_lo < x_hi)) return 0.0;
  return std::exp(-x_lo) - (std::isinf(x_hi) ? 0.0 : std::exp(-x_hi));
}

LinIndReport lin_ind_probability(const LinIndSetup& q, std::size_t n, std::uint64_t seed, unsigned threads) {
  const std::size_t chunk = 1 << 14;
  const std::size_t n_chunks = (n + chunk - 1) / chunk;
  struct Acc {
    double sx = 0, sxx = 0, sy = 0, syy = 0, sd = 0, sdd = 0;
  };
  std::vector<Acc> acc(n_chunks);
  parallel_chunks(n, chunk, threads, [&](std::size_t c, std::size_t lo, std::size_t hi) {
    Rng rng = Rng::derive(seed, {0x11dULL, c});
    Acc a;
    for (std::size_t i = lo; i < hi; ++i) {
      const double xi1 = rng.exponential();
      const double xi2 = rng.exponential();
      const double xi3 = rng.exponential();
      const double x = lin_ind_hit(q, xi1, xi2, xi3) ? 1.0 : 0.0;
      const double y = lin_ind_conditional(q, xi2, xi3);
      a.sx += x;
      a.sxx += x * x;
      a.sy += y;
      a.syy += y * y;
      a.sd += x - y;
      a.sdd += (x - y) * (x - y);
    }
    acc[c] = a;
  });
  Acc t;
  for (const auto& a : acc) {
    t.sx += a.sx;
    t.sxx += a.sxx;
    t.sy += a.sy;
    t.syy += a.syy;
    t.sd += a.sd;
    t.sdd += a.sdd;
  }
  const double nn = static_cast<double>(n);
  auto se = [&](double s, double ss) {
    const double m = s / nn;
    return std::sqrt(std::max(0.0, ss / nn - m * m) / nn);
  };
  LinIndReport rep;
  rep.n = n;
  rep.p_geometric = t.sx / nn;
  rep.se_geometric = se(t.sx, t.sxx);
  rep.p_slab = t.sy / nn;
  rep.se_slab = se(t.sy, t.syy);
  rep.diff = t.sd / nn;
  rep.se_diff = se(t.sd, t.sdd);
  rep.agree = std::fabs(rep.diff) <= 2.0 * rep.se_diff;
  return rep;
}

}  // namespace windtree
