#pragma once

// Statistical utilities shared by every stage of the pipeline: chi-square
// quantiles, order-statistic quantiles, sample standard deviations and seeded
// bootstrap index draws.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pcaids/error.hpp"

namespace pcaids {

using Index = Eigen::Index;

/// Regularized lower incomplete gamma function P(a, x).
inline double regularized_gamma_p(double a, double x) {
  if (!(a > 0.0) || x < 0.0 || std::isnan(x)) {
    throw InvalidArgument("regularized_gamma_p: requires a > 0 and x >= 0");
  }
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  constexpr double eps = 1e-16;
  constexpr int max_iter = 10000;
  const double log_prefix = -x + a * std::log(x) - std::lgamma(a);
  if (x < a + 1.0) {
    // Power series.
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int n = 0; n < max_iter; ++n) {
      ap += 1.0;
      term *= x / ap;
      sum += term;
      if (std::abs(term) < std::abs(sum) * eps) break;
    }
    return std::min(1.0, sum * std::exp(log_prefix));
  }
  // Continued fraction for Q(a, x), modified Lentz.
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < max_iter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < eps) break;
  }
  return std::max(0.0, 1.0 - std::exp(log_prefix) * h);
}

inline double chi_square_cdf(double x, int df) {
  if (df < 1) throw InvalidArgument("chi_square_cdf: df must be >= 1");
  if (x <= 0.0) return 0.0;
  return regularized_gamma_p(0.5 * df, 0.5 * x);
}

/// Inverse chi-square CDF by bracketing bisection; absolute accuracy 1e-9 or better.
inline double chi_square_quantile(double prob, int df) {
  if (!(prob > 0.0 && prob < 1.0)) {
    throw InvalidArgument("chi_square_quantile: prob must lie in (0, 1)");
  }
  if (df < 1) throw InvalidArgument("chi_square_quantile: df must be >= 1");
  double lo = 0.0;
  double hi = std::max(1.0, static_cast<double>(df));
  while (chi_square_cdf(hi, df) < prob) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) throw NumericalError("chi_square_quantile: failed to bracket root");
  }
  for (int iter = 0; iter < 400; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (chi_square_cdf(mid, df) < prob) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= 1e-13 * std::max(1.0, hi)) break;
  }
  return 0.5 * (lo + hi);
}

/// 1-based order-statistic rank ceil(prob * k) clamped to [1, k]. A relative
/// slack absorbs representation error such as 0.7 * 10 = 7.000000000000001.
inline std::size_t quantile_rank(double prob, std::size_t k) {
  const double r = prob * static_cast<double>(k);
  const double rank = std::ceil(r - 1e-9 * std::max(1.0, r));
  return static_cast<std::size_t>(std::clamp(rank, 1.0, static_cast<double>(k)));
}

/// Inverse empirical CDF of already sorted samples.
inline double empirical_quantile_sorted(std::span<const double> sorted, double prob) {
  if (sorted.empty()) throw InvalidArgument("empirical_quantile: empty distribution");
  if (!(prob > 0.0 && prob < 1.0)) {
    throw InvalidArgument("empirical_quantile: prob must lie in (0, 1)");
  }
  return sorted[quantile_rank(prob, sorted.size()) - 1];
}

/// Same convention on unsorted values, via selection. Reorders `values`.
inline double empirical_quantile_select(std::span<double> values, double prob) {
  if (values.empty()) throw InvalidArgument("empirical_quantile: empty distribution");
  if (!(prob > 0.0 && prob < 1.0)) {
    throw InvalidArgument("empirical_quantile: prob must lie in (0, 1)");
  }
  const auto k = quantile_rank(prob, values.size()) - 1;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end());
  return values[k];
}

/// Sorted sample of a scalar statistic, e.g. a bootstrap distribution.
class EmpiricalDistribution {
 public:
  EmpiricalDistribution() = default;
  explicit EmpiricalDistribution(std::vector<double> samples) : samples_(std::move(samples)) {
    if (samples_.size() < 2) {
      throw InvalidArgument("EmpiricalDistribution: at least 2 samples required");
    }
    for (double s : samples_) {
      if (!std::isfinite(s)) throw InvalidArgument("EmpiricalDistribution: non-finite sample");
    }
    std::sort(samples_.begin(), samples_.end());
  }

  std::span<const double> samples() const noexcept { return samples_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  double quantile(double prob) const { return empirical_quantile_sorted(samples_, prob); }
  double median() const { return quantile(0.5); }
  double min() const { return samples_.front(); }
  double max() const { return samples_.back(); }

 private:
  std::vector<double> samples_;
};

inline double empirical_quantile(const EmpiricalDistribution& dist, double prob) {
  return empirical_quantile_sorted(dist.samples(), prob);
}

inline double mean(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("mean: empty input");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

/// Sample standard deviation with divisor (count - 1).
inline double column_sd(std::span<const double> column) {
  if (column.size() < 2) throw InvalidArgument("column_sd: at least 2 values required");
  const double m = mean(column);
  double ss = 0.0;
  for (double v : column) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(column.size() - 1));
}

/// Child seed for replicate `stream` of a run rooted at `root`: the SplitMix64
/// finalizer applied to root + golden_gamma * (stream + 1).
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
  std::uint64_t z = root + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

using Rng = std::mt19937_64;

/// `sample_size` row indices drawn uniformly with replacement from [0, row_count).
inline std::vector<Index> bootstrap_resample(Index row_count, Index sample_size, std::uint64_t seed) {
  if (row_count < 1 || sample_size < 1) {
    throw InvalidArgument("bootstrap_resample: row_count and sample_size must be >= 1");
  }
  Rng rng(seed);
  std::uniform_int_distribution<Index> pick(0, row_count - 1);
  std::vector<Index> out(static_cast<std::size_t>(sample_size));
  for (auto& i : out) i = pick(rng);
  return out;
}

}  // namespace pcaids
