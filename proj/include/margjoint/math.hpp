#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <vector>

namespace margjoint {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Exact accumulation of doubles (Shewchuk expansions, same scheme as
// Python's math.fsum). The result is the correctly rounded sum of the
// inputs, so it does not depend on the order terms were added in.
class ExactSum {
 public:
  void add(double x) {
    std::size_t kept = 0;
    for (double partial : partials_) {
      if (std::abs(x) < std::abs(partial)) std::swap(x, partial);
      const double hi = x + partial;
      const double lo = partial - (hi - x);
      if (lo != 0.0) partials_[kept++] = lo;
      x = hi;
    }
    partials_.resize(kept);
    partials_.push_back(x);
  }

  double value() const {
    std::size_t n = partials_.size();
    if (n == 0) return 0.0;
    double total = partials_[--n];
    while (n > 0) {
      const double y = partials_[--n];
      const double hi = total + y;
      const double lo = y - (hi - total);
      total = hi;
      if (lo != 0.0) {
        // round-half-even correction when the discarded tail is exactly
        // half an ulp and the lower partials push it over
        if (n > 0 && ((lo < 0.0 && partials_[n - 1] < 0.0) ||
                      (lo > 0.0 && partials_[n - 1] > 0.0))) {
          const double y2 = lo * 2.0;
          const double corrected = total + y2;
          if (y2 == corrected - total) total = corrected;
        }
        break;
      }
    }
    return total;
  }

  void reset() { partials_.clear(); }

 private:
  std::vector<double> partials_;
};

// Precomputed log-factorials for 0..max_n. Built once by compensated
// cumulative summation so adjacent entries stay consistent with log(m).
class LogGammaTable {
 public:
  explicit LogGammaTable(std::int64_t max_n) {
    if (max_n < 0) throw std::invalid_argument("LogGammaTable: max_n must be >= 0");
    values_.resize(static_cast<std::size_t>(max_n) + 1);
    values_[0] = 0.0;
    long double acc = 0.0L;
    for (std::int64_t m = 1; m <= max_n; ++m) {
      acc += std::log(static_cast<long double>(m));
      values_[static_cast<std::size_t>(m)] = static_cast<double>(acc);
    }
  }

  std::int64_t max_n() const { return static_cast<std::int64_t>(values_.size()) - 1; }

  double log_factorial(std::int64_t m) const {
    if (m < 0 || m > max_n()) throw std::domain_error("LogGammaTable: count out of range");
    return values_[static_cast<std::size_t>(m)];
  }

  // unchecked lookup for inner loops
  double operator[](std::int64_t m) const { return values_[static_cast<std::size_t>(m)]; }

  // Process-wide table, grown on demand and shared across threads.
  static std::shared_ptr<const LogGammaTable> shared(std::int64_t at_least) {
    static std::mutex mutex;
    static std::shared_ptr<const LogGammaTable> cache;
    std::lock_guard<std::mutex> lock(mutex);
    if (!cache || cache->max_n() < at_least) {
      const std::int64_t size = std::max<std::int64_t>(
          at_least, cache ? 2 * cache->max_n() : 1024);
      cache = std::make_shared<const LogGammaTable>(size);
    }
    return cache;
  }

 private:
  std::vector<double> values_;
};

// Streaming log-sum-exp with a known maximum: callers first find the max
// of the log terms, then feed them here.
class LogSumExp {
 public:
  explicit LogSumExp(double max_term) : max_(max_term) {}

  void add(double log_term) {
    if (log_term == kNegInf) return;
    sum_ += std::exp(log_term - max_);
  }

  double value() const {
    if (max_ == kNegInf || sum_ == 0.0) return kNegInf;
    return max_ + std::log(sum_);
  }

 private:
  double max_;
  double sum_ = 0.0;
};

inline double log_sum_exp_pair(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  const double lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Standard-normal quantile: Acklam's rational approximation polished with
// one Halley step against erfc, giving near machine precision.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p must be in (0,1)");

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

  const double err = normal_cdf(x) - p;
  const double u = err * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

// Quantile of the chi-square distribution with one degree of freedom,
// via the square of the matching normal quantile.
inline double chi_square1_quantile(double q) {
  if (!(q > 0.0 && q < 1.0)) throw std::domain_error("chi_square1_quantile: q must be in (0,1)");
  const double z = normal_quantile(0.5 * (1.0 + q));
  return z * z;
}

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) throw std::domain_error("mean_of: empty input");
  ExactSum s;
  for (double x : v) s.add(x);
  return s.value() / static_cast<double>(v.size());
}

// sample standard deviation (divisor n-1)
inline double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) throw std::domain_error("sample_sd: need at least two values");
  const double m = mean_of(v);
  ExactSum s;
  for (double x : v) s.add((x - m) * (x - m));
  return std::sqrt(s.value() / static_cast<double>(v.size() - 1));
}

inline double median_of(std::vector<double> v) {
  if (v.empty()) throw std::domain_error("median_of: empty input");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Pearson sample correlation, two-pass.
inline double pearson_correlation(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson_correlation: length mismatch");
  if (x.size() < 2) throw std::domain_error("pearson_correlation: need at least two pairs");
  const double mx = mean_of(x);
  const double my = mean_of(y);
  ExactSum sxy, sxx, syy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy.add(dx * dy);
    sxx.add(dx * dx);
    syy.add(dy * dy);
  }
  const double den = std::sqrt(sxx.value()) * std::sqrt(syy.value());
  if (den == 0.0) throw std::domain_error("pearson_correlation: zero variance");
  return std::clamp(sxy.value() / den, -1.0, 1.0);
}

}  // namespace margjoint
