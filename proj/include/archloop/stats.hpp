#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "archloop/candidate.hpp"

namespace archloop {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double x) const { return lo <= x && x <= hi; }
  double width() const { return hi - lo; }

  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Inverse standard normal CDF. p in (0, 1).
double normal_quantile(double p);

/// Student t CDF with `df` degrees of freedom.
double student_t_cdf(double t, double df);

/// Inverse Student t CDF. p in (0, 1), df > 0.
double student_t_quantile(double p, double df);

/// Wilson score interval for k successes out of n at two-sided `confidence`.
/// Throws UndefinedInterval when n == 0; std::invalid_argument when k > n or
/// confidence is outside (0, 1).
Interval wilson_interval(std::size_t k, std::size_t n, double confidence = 0.95);

struct MeanInterval {
  double mean = 0.0;
  Interval ci;
};

/// Mean +/- t_{(1+c)/2, n-1} * s / sqrt(n), s with the n-1 denominator.
/// Throws InsufficientData for fewer than two samples.
MeanInterval t_interval(std::span<const double> samples, double confidence = 0.95);

struct CycleStats {
  int cycle = 0;
  double threshold = 0.40;
  std::size_t n_gen = 0;
  std::size_t n_valid = 0;
  double valid_rate = 0.0;
  Interval valid_rate_ci;
  std::optional<double> best_acc;
  std::optional<double> mean_acc;
  std::optional<double> median_acc;
  std::optional<double> std_acc;
  std::optional<Interval> mean_acc_ci;
  std::size_t n_above_threshold = 0;
  std::optional<double> frac_above_threshold;
  std::optional<Interval> frac_above_threshold_ci;
  std::size_t n_near_duplicate = 0;
  std::size_t n_unique_accepted = 0;
  std::size_t corpus_size_after = 0;
  bool complete = true;

  friend bool operator==(const CycleStats&, const CycleStats&) = default;
};

/// Fills every CycleStats field except corpus_size_after (the caller knows the
/// corpus). Accuracy fields cover trained candidates only; the above-threshold
/// fraction is taken over trained candidates with a Wilson interval.
/// Permutation-invariant. Throws EmptyCycle for an empty list.
CycleStats summarize_cycle(std::span<const CandidateRecord> records, double threshold,
                           double confidence = 0.95);

// Pooled over the union of all cycles' records (not a mean of cycle means).
struct PooledStats {
  std::size_t n_gen = 0;
  std::size_t n_valid = 0;
  double valid_rate = 0.0;
  std::optional<Interval> valid_rate_ci;
  std::optional<double> mean_acc;
  std::optional<Interval> mean_acc_ci;
  std::optional<double> frac_above_threshold;
  std::optional<Interval> frac_above_threshold_ci;
  std::size_t n_accepted = 0;
};

PooledStats pool_records(std::span<const CandidateRecord> records, double threshold,
                         double confidence = 0.95);

}  // namespace archloop
