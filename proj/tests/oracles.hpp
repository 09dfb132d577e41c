#pragma once

// Independent reference implementations used to check the library: literal
// enumeration of per-individual outcomes, finite differences, dense-grid
// maximization, and bisection-based quantiles. Deliberately brute-force.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace oracles {

// Joint pmf of (x, y) for n individuals by enumerating all 4^n outcome
// sequences. Cell order: (both, first only, second only, neither).
inline std::vector<std::vector<double>> enumerate_joint_pmf(int n,
                                                            const std::array<double, 4>& cells) {
  std::vector<std::vector<double>> table(static_cast<std::size_t>(n) + 1,
                                         std::vector<double>(static_cast<std::size_t>(n) + 1, 0.0));
  const std::int64_t total = static_cast<std::int64_t>(1) << (2 * n);   // 4^n
  for (std::int64_t seq = 0; seq < total; ++seq) {
    double prob = 1.0;
    int x = 0;
    int y = 0;
    std::int64_t s = seq;
    for (int i = 0; i < n; ++i) {
      const int c = static_cast<int>(s & 3);
      s >>= 2;
      prob *= cells[static_cast<std::size_t>(c)];
      if (c == 0 || c == 1) ++x;
      if (c == 0 || c == 2) ++y;
    }
    table[static_cast<std::size_t>(x)][static_cast<std::size_t>(y)] += prob;
  }
  return table;
}

inline double central_diff1(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline double central_diff2(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
}

// Two-stage dense grid: a coarse scan followed by a fine scan around the
// coarse winner. Effective resolution (hi-lo) * 4 / (points * points).
inline double dense_grid_argmax(const std::function<double(double)>& f, double lo, double hi,
                                int points = 10000) {
  auto scan = [&](double a, double b) {
    double best_x = a;
    double best_v = f(a);
    for (int i = 1; i < points; ++i) {
      const double x = a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1);
      const double v = f(x);
      if (v > best_v) {
        best_v = v;
        best_x = x;
      }
    }
    return best_x;
  };
  const double coarse = scan(lo, hi);
  const double step = (hi - lo) / static_cast<double>(points - 1);
  const double a = std::max(lo, coarse - 2.0 * step);
  const double b = std::min(hi, coarse + 2.0 * step);
  return scan(a, b);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Quantile by bisection on the erfc-based CDF; independent of the library's
// rational approximation.
inline double normal_quantile(double p) {
  double lo = -40.0;
  double hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// CDF of chi-square with one degree of freedom.
inline double chi2_1_cdf(double x) { return std::erf(std::sqrt(x / 2.0)); }

inline double chi2_1_quantile(double q) {
  double lo = 0.0;
  double hi = 200.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (chi2_1_cdf(mid) < q ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline double binomial_pmf(int x, int n, double p) {
  double logc = std::lgamma(n + 1.0) - std::lgamma(x + 1.0) - std::lgamma(n - x + 1.0);
  double logp = 0.0;
  if (x > 0) logp += x * std::log(p);
  if (n - x > 0) logp += (n - x) * std::log1p(-p);
  return std::exp(logc + logp);
}

}  // namespace oracles
