#include "archloop/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "archloop/error.hpp"

namespace archloop {

namespace {

// Continued fraction for the regularized incomplete beta (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-16;
  double c = 1.0;
  double d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 1000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

double regularized_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                           b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double z_for(double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw std::invalid_argument("confidence must lie in (0, 1)");
  }
  return normal_quantile(0.5 + confidence / 2.0);
}

}  // namespace

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile needs p in (0, 1)");
  // Acklam's rational approximation, then one Halley step against erfc.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

double student_t_cdf(double t, double df) {
  if (!(df > 0.0)) throw std::invalid_argument("degrees of freedom must be positive");
  const double x = df / (df + t * t);
  const double tail = 0.5 * regularized_beta(df / 2.0, 0.5, x);
  return t >= 0.0 ? 1.0 - tail : tail;
}

double student_t_quantile(double p, double df) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("student_t_quantile needs p in (0, 1)");
  if (!(df > 0.0)) throw std::invalid_argument("degrees of freedom must be positive");
  if (p == 0.5) return 0.0;
  if (p < 0.5) return -student_t_quantile(1.0 - p, df);
  // Bracket, then bisect the monotone CDF to machine precision.
  double lo = 0.0;
  double hi = std::max(1.0, normal_quantile(p));
  while (student_t_cdf(hi, df) < p) {
    lo = hi;
    hi *= 2.0;
  }
  for (int i = 0; i < 200 && hi - lo > 1e-13 * std::max(1.0, hi); ++i) {
    const double mid = 0.5 * (lo + hi);
    (student_t_cdf(mid, df) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Interval wilson_interval(std::size_t k, std::size_t n, double confidence) {
  if (n == 0) throw UndefinedInterval("Wilson interval needs n >= 1");
  if (k > n) throw std::invalid_argument("Wilson interval needs k <= n");
  const double z = z_for(confidence);
  const double nd = static_cast<double>(n);
  const double p = static_cast<double>(k) / nd;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nd;
  const double center = (p + z2 / (2.0 * nd)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / nd + z2 / (4.0 * nd * nd));
  Interval ci{std::max(0.0, center - half), std::min(1.0, center + half)};
  // Exact endpoints at the boundaries; rounding must not push k/n outside.
  if (k == 0) ci.lo = 0.0;
  if (k == n) ci.hi = 1.0;
  ci.lo = std::min(ci.lo, p);
  ci.hi = std::max(ci.hi, p);
  return ci;
}

MeanInterval t_interval(std::span<const double> samples, double confidence) {
  if (samples.size() < 2) throw InsufficientData("t interval needs at least two samples");
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw std::invalid_argument("confidence must lie in (0, 1)");
  }
  if (std::all_of(samples.begin(), samples.end(), [&](double x) { return x == samples.front(); })) {
    return {samples.front(), {samples.front(), samples.front()}};
  }
  const double n = static_cast<double>(samples.size());
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  const double half = student_t_quantile(0.5 + confidence / 2.0, n - 1.0) * sd / std::sqrt(n);
  return {mean, {mean - half, mean + half}};
}

namespace {

std::vector<double> trained_accuracies(std::span<const CandidateRecord> records) {
  std::vector<double> acc;
  for (const auto& r : records) {
    if (r.trained()) acc.push_back(r.eval->accuracy);
  }
  // Sorting makes every reduction below independent of input order.
  std::sort(acc.begin(), acc.end());
  return acc;
}

}  // namespace

CycleStats summarize_cycle(std::span<const CandidateRecord> records, double threshold,
                           double confidence) {
  if (records.empty()) throw EmptyCycle("cannot summarize a cycle without candidates");
  CycleStats s;
  s.cycle = records.front().cycle;
  s.threshold = threshold;
  s.n_gen = records.size();
  for (const auto& r : records) {
    if (r.disposition == Disposition::Accepted) ++s.n_unique_accepted;
    if (r.disposition == Disposition::NearDuplicate) ++s.n_near_duplicate;
  }

  const std::vector<double> acc = trained_accuracies(records);
  s.n_valid = acc.size();
  s.valid_rate = static_cast<double>(s.n_valid) / static_cast<double>(s.n_gen);
  s.valid_rate_ci = wilson_interval(s.n_valid, s.n_gen, confidence);
  if (acc.empty()) return s;

  s.best_acc = acc.back();
  const std::size_t m = acc.size();
  s.median_acc = (m % 2 == 1) ? acc[m / 2] : 0.5 * (acc[m / 2 - 1] + acc[m / 2]);
  s.n_above_threshold = static_cast<std::size_t>(
      std::count_if(acc.begin(), acc.end(), [&](double a) { return a >= threshold; }));
  s.frac_above_threshold = static_cast<double>(s.n_above_threshold) / static_cast<double>(m);
  s.frac_above_threshold_ci = wilson_interval(s.n_above_threshold, m, confidence);
  if (m >= 2) {
    const MeanInterval mi = t_interval(acc, confidence);
    s.mean_acc = mi.mean;
    s.mean_acc_ci = Interval{std::max(0.0, mi.ci.lo), std::min(1.0, mi.ci.hi)};
    double ss = 0.0;
    for (double a : acc) ss += (a - mi.mean) * (a - mi.mean);
    s.std_acc = std::sqrt(ss / static_cast<double>(m - 1));
  } else {
    s.mean_acc = acc.front();
  }
  return s;
}

PooledStats pool_records(std::span<const CandidateRecord> records, double threshold,
                         double confidence) {
  PooledStats p;
  p.n_gen = records.size();
  for (const auto& r : records) p.n_accepted += r.disposition == Disposition::Accepted;
  const std::vector<double> acc = trained_accuracies(records);
  p.n_valid = acc.size();
  if (p.n_gen == 0) return p;
  p.valid_rate = static_cast<double>(p.n_valid) / static_cast<double>(p.n_gen);
  p.valid_rate_ci = wilson_interval(p.n_valid, p.n_gen, confidence);
  if (acc.empty()) return p;
  const auto above = static_cast<std::size_t>(
      std::count_if(acc.begin(), acc.end(), [&](double a) { return a >= threshold; }));
  p.frac_above_threshold = static_cast<double>(above) / static_cast<double>(acc.size());
  p.frac_above_threshold_ci = wilson_interval(above, acc.size(), confidence);
  if (acc.size() >= 2) {
    const MeanInterval mi = t_interval(acc, confidence);
    p.mean_acc = mi.mean;
    p.mean_acc_ci = mi.ci;
  } else {
    p.mean_acc = acc.front();
  }
  return p;
}

}  // namespace archloop
