#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "binary_core.hpp"
#include "errors.hpp"
#include "math.hpp"

namespace margjoint {

struct EstimateOptions {
  std::int64_t grid_points = 101;
  double tol = 1e-8;
  std::int64_t max_iter = 500;
  double boundary_eps = 1e-9;
  double alpha = 0.05;

  void validate() const {
    if (grid_points < 3) throw std::invalid_argument("EstimateOptions: grid_points must be >= 3");
    if (!(tol > 0.0)) throw std::invalid_argument("EstimateOptions: tol must be > 0");
    if (max_iter < 1) throw std::invalid_argument("EstimateOptions: max_iter must be >= 1");
    if (!(boundary_eps > 0.0 && boundary_eps < 1e-3))
      throw std::invalid_argument("EstimateOptions: boundary_eps must be in (0, 1e-3)");
    if (!(alpha > 0.0 && alpha < 1.0))
      throw std::invalid_argument("EstimateOptions: alpha must be in (0, 1)");
  }
};

struct PointEstimate {
  double value = 0.0;
  std::optional<double> se;   // absent when the curvature-based SE is unavailable
  bool boundary = false;      // estimate pinned at a feasibility bound
};

enum class IntervalMethod { normal, likelihood_ratio };

struct IntervalEstimate {
  double lower = 0.0;
  double upper = 0.0;
  IntervalMethod method = IntervalMethod::normal;
  bool clipped_low = false;
  bool clipped_high = false;

  bool contains(double v) const { return lower <= v && v <= upper; }
  double width() const { return upper - lower; }
};

struct Interval {
  double lo;
  double hi;
};

// Feasible range of the joint probability given the two margins.
inline Interval p11_feasible_interval(double p1, double p2) {
  return {std::max(0.0, p1 + p2 - 1.0), std::min(p1, p2)};
}

// Closed-form marginal MLEs: pooled success fractions with binomial SEs.
inline std::pair<PointEstimate, PointEstimate> estimate_marginals(const SummaryCollection& data) {
  const double n = static_cast<double>(data.total_n());
  const double p1 = static_cast<double>(data.total_x()) / n;
  const double p2 = static_cast<double>(data.total_y()) / n;
  PointEstimate e1{p1, std::sqrt(p1 * (1.0 - p1) / n), false};
  PointEstimate e2{p2, std::sqrt(p2 * (1.0 - p2) / n), false};
  return {e1, e2};
}

// Log-likelihood with the margins profiled out at their closed-form MLEs.
// Defined on the feasible interval for p11 shrunk by boundary_eps.
inline double profile_loglik_p11(const SummaryCollection& data, double p11,
                                 const EstimateOptions& opts = {}) {
  opts.validate();
  const auto [m1, m2] = estimate_marginals(data);
  const Interval raw = p11_feasible_interval(m1.value, m2.value);
  const double lo = std::max(opts.boundary_eps, raw.lo + opts.boundary_eps);
  const double hi = raw.hi - opts.boundary_eps;
  if (!(p11 >= lo && p11 <= hi))
    throw std::domain_error("profile_loglik_p11: p11 outside the clamped feasible interval");
  return log_likelihood(data, JointBinaryParams(m1.value, m2.value, p11));
}

// Curvature-based standard error of the joint probability at p; absent when
// p touches a boundary or the second derivative is not negative there.
inline std::optional<double> se_p11(const SummaryCollection& data, const JointBinaryParams& p) {
  if (!p.strictly_interior()) return std::nullopt;
  const double h = d2_loglik_dp11(data, p);
  if (!(h < 0.0)) return std::nullopt;
  return std::sqrt(-1.0 / h);
}

namespace detail {

struct ProfileFit {
  PointEstimate p11;
  double grid_argmax = 0.0;
  std::int64_t iterations = 0;
  double loglik = 0.0;
};

inline ProfileFit estimate_p11_fit(const SummaryCollection& data, const EstimateOptions& opts) {
  opts.validate();
  const auto [m1, m2] = estimate_marginals(data);
  const double p1 = m1.value;
  const double p2 = m2.value;
  const double eps = opts.boundary_eps;
  if (std::min(p1, p2) <= 2.0 * eps)
    throw std::domain_error("estimate_p11: a margin estimate is too close to zero");

  const Interval raw = p11_feasible_interval(p1, p2);
  const double lo = std::max(eps, raw.lo + eps);
  const double hi = raw.hi - eps;

  ProfileFit fit;
  if (lo >= hi) {
    // the margins pin the joint probability; report the collapsed interval
    const double v = 0.5 * (raw.lo + raw.hi);
    fit.p11 = {v, std::nullopt, true};
    fit.grid_argmax = v;
    fit.loglik = log_likelihood(data, JointBinaryParams(p1, p2, v));
    return fit;
  }

  auto objective = [&](double v) {
    return log_likelihood(data, JointBinaryParams(p1, p2, v));
  };
  auto score = [&](double v) { return d1_loglik_dp11(data, JointBinaryParams(p1, p2, v)); };

  const std::int64_t points = opts.grid_points;
  std::vector<double> grid(static_cast<std::size_t>(points));
  std::size_t best = 0;
  double best_val = kNegInf;
  for (std::int64_t i = 0; i < points; ++i) {
    const double v = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    grid[static_cast<std::size_t>(i)] = v;
    const double val = objective(v);
    if (val > best_val) {
      best_val = val;
      best = static_cast<std::size_t>(i);
    }
  }
  fit.grid_argmax = grid[best];

  double a = grid[best > 0 ? best - 1 : 0];
  double b = grid[best + 1 < grid.size() ? best + 1 : grid.size() - 1];
  std::int64_t iters = 0;
  double x = grid[best];

  auto check_budget = [&](double current) {
    if (iters > opts.max_iter)
      throw ConvergenceError("estimate_p11: iteration budget exhausted", current,
                             objective(current));
  };

  if (score(a) > 0.0 && score(b) < 0.0) {
    // the stationary point is bracketed: bisect on the score sign
    while (b - a > opts.tol) {
      ++iters;
      check_budget(0.5 * (a + b));
      const double mid = 0.5 * (a + b);
      (score(mid) > 0.0 ? a : b) = mid;
    }
    x = 0.5 * (a + b);
  } else {
    // maximum sits against an edge of the bracket; golden-section search
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - gr * (b - a);
    double d = a + gr * (b - a);
    double fc = objective(c);
    double fd = objective(d);
    while (b - a > opts.tol) {
      ++iters;
      check_budget(0.5 * (a + b));
      if (fc >= fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - gr * (b - a);
        fc = objective(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + gr * (b - a);
        fd = objective(d);
      }
    }
    x = 0.5 * (a + b);
  }

  // Newton polish on the score, kept inside the bracket established above
  for (int step = 0; step < 4; ++step) {
    const JointBinaryParams pp(p1, p2, x);
    if (!pp.strictly_interior()) break;
    const double g = d1_loglik_dp11(data, pp);
    const double h = d2_loglik_dp11(data, pp);
    if (!(h < 0.0)) break;
    const double nx = x - g / h;
    if (!(nx > lo && nx < hi) || std::abs(nx - x) > 10.0 * opts.tol) break;
    ++iters;
    x = nx;
    if (std::abs(g / h) < 0.1 * opts.tol) break;
  }

  x = std::clamp(x, lo, hi);
  const bool at_lower = x - lo <= 2.0 * opts.tol;
  const bool at_upper = hi - x <= 2.0 * opts.tol;
  std::optional<double> se;
  if (!at_lower && !at_upper) {
    se = se_p11(data, JointBinaryParams(p1, p2, x));
  } else {
    // A binding feasibility edge makes the estimate equal the binding margin
    // statistic, so its sampling variance is the binomial variance of that
    // statistic. Pointwise curvature this close to a vanishing cell is
    // dominated by cancellation and its one-sided limit need not be negative,
    // so it cannot price the uncertainty here. A bound pinned at zero is
    // deterministic and leaves the SE unavailable.
    const double total = static_cast<double>(data.total_n());
    const double m = at_upper ? raw.hi : raw.lo;
    if (m > 0.0 && m < 1.0) se = std::sqrt(m * (1.0 - m) / total);
  }
  fit.p11 = {x, se, at_lower || at_upper};
  fit.iterations = iters;
  fit.loglik = objective(x);
  return fit;
}

}  // namespace detail

// MLE of the joint probability by profile maximization over the clamped
// feasible interval: grid initialization, score-sign bisection (or
// golden-section when the optimum is not bracketed), then Newton polish.
inline PointEstimate estimate_p11(const SummaryCollection& data, const EstimateOptions& opts = {}) {
  return detail::estimate_p11_fit(data, opts).p11;
}

// Wald interval clipped to the feasible bounds; clip flags record which side
// was cut.
inline IntervalEstimate normal_ci(double point, double se, double alpha, const Interval& bounds) {
  if (!(se > 0.0) || !std::isfinite(se))
    throw std::invalid_argument("normal_ci: se must be positive and finite");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("normal_ci: alpha must be in (0, 1)");
  if (!(bounds.lo <= bounds.hi)) throw std::invalid_argument("normal_ci: bounds are inverted");
  const double z = normal_quantile(1.0 - 0.5 * alpha);
  IntervalEstimate ci{point - z * se, point + z * se, IntervalMethod::normal, false, false};
  if (ci.lower < bounds.lo) {
    ci.lower = bounds.lo;
    ci.clipped_low = true;
  }
  if (ci.upper > bounds.hi) {
    ci.upper = bounds.hi;
    ci.clipped_high = true;
  }
  return ci;
}

namespace detail {

// Inverts -2 (l(v) - l(mle)) = threshold by bisection on one side of the
// MLE. lambda may be +inf inside the search range; the bracket stays valid
// because lambda(center) = 0.
template <typename Lambda>
IntervalEstimate lr_interval(Lambda&& lambda, double center, const Interval& feas,
                             double threshold) {
  constexpr double root_tol = 1e-8;
  IntervalEstimate ci{center, center, IntervalMethod::likelihood_ratio, false, false};

  if (lambda(feas.lo) <= threshold) {
    ci.lower = feas.lo;
    ci.clipped_low = true;
  } else {
    double a = feas.lo;
    double b = center;
    while (b - a > root_tol) {
      const double mid = 0.5 * (a + b);
      (lambda(mid) > threshold ? a : b) = mid;
    }
    ci.lower = 0.5 * (a + b);
  }

  if (lambda(feas.hi) <= threshold) {
    ci.upper = feas.hi;
    ci.clipped_high = true;
  } else {
    double a = center;
    double b = feas.hi;
    while (b - a > root_tol) {
      const double mid = 0.5 * (a + b);
      (lambda(mid) > threshold ? b : a) = mid;
    }
    ci.upper = 0.5 * (a + b);
  }
  return ci;
}

}  // namespace detail

// Likelihood-ratio interval for the joint probability with margins held at
// their MLEs.
inline IntervalEstimate lr_ci_p11(const SummaryCollection& data, const JointBinaryParams& mle,
                                  double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("lr_ci_p11: alpha must be in (0, 1)");
  const double lmax = log_likelihood(data, mle);
  const double threshold = chi_square1_quantile(1.0 - alpha);
  auto lambda = [&](double v) {
    const double l = log_likelihood(data, JointBinaryParams(mle.p1, mle.p2, v));
    return l == kNegInf ? std::numeric_limits<double>::infinity() : -2.0 * (l - lmax);
  };
  return detail::lr_interval(lambda, mle.p11, p11_feasible_interval(mle.p1, mle.p2), threshold);
}

enum class MarginSelect { first, second };

// Likelihood-ratio interval for one margin with the other margin and the
// joint probability held at their MLEs.
inline IntervalEstimate lr_ci_marginal(const SummaryCollection& data, const JointBinaryParams& mle,
                                       MarginSelect which, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("lr_ci_marginal: alpha must be in (0, 1)");
  const double lmax = log_likelihood(data, mle);
  const double threshold = chi_square1_quantile(1.0 - alpha);
  const bool first = (which == MarginSelect::first);
  const double center = first ? mle.p1 : mle.p2;
  const double other = first ? mle.p2 : mle.p1;
  const Interval feas{std::max(0.0, mle.p11), std::min(1.0, 1.0 - other + mle.p11)};
  auto lambda = [&](double v) {
    const JointBinaryParams p = first ? JointBinaryParams(v, mle.p2, mle.p11)
                                      : JointBinaryParams(mle.p1, v, mle.p11);
    const double l = log_likelihood(data, p);
    return l == kNegInf ? std::numeric_limits<double>::infinity() : -2.0 * (l - lmax);
  };
  return detail::lr_interval(lambda, center, feas, threshold);
}

struct EstimateReport {
  PointEstimate p1;
  PointEstimate p2;
  PointEstimate p11;
  double phi = 0.0;
  double loglik_at_mle = 0.0;
  double grid_argmax = 0.0;
  std::int64_t optimizer_iterations = 0;
  IntervalEstimate ci1_p1;
  IntervalEstimate ci1_p2;
  std::optional<IntervalEstimate> ci1_p11;   // absent when the SE is unavailable
  IntervalEstimate ci2_p1;
  IntervalEstimate ci2_p2;
  IntervalEstimate ci2_p11;
};

// Point estimates, SEs, both interval families, and the phi coefficient in
// one pass. Requires both margin estimates strictly inside (0, 1).
inline EstimateReport full_estimate(const SummaryCollection& data, const EstimateOptions& opts = {}) {
  opts.validate();
  const auto [m1, m2] = estimate_marginals(data);
  detail::ProfileFit fit = detail::estimate_p11_fit(data, opts);
  const JointBinaryParams mle(m1.value, m2.value, fit.p11.value);

  EstimateReport rep;
  rep.p1 = m1;
  rep.p2 = m2;
  rep.p11 = fit.p11;
  rep.phi = phi_coefficient(mle);
  rep.loglik_at_mle = fit.loglik;
  rep.grid_argmax = fit.grid_argmax;
  rep.optimizer_iterations = fit.iterations;

  const Interval feas11 = p11_feasible_interval(m1.value, m2.value);
  const Interval feas1{std::max(0.0, mle.p11), std::min(1.0, 1.0 - m2.value + mle.p11)};
  const Interval feas2{std::max(0.0, mle.p11), std::min(1.0, 1.0 - m1.value + mle.p11)};

  rep.ci1_p1 = normal_ci(m1.value, *m1.se, opts.alpha, feas1);
  rep.ci1_p2 = normal_ci(m2.value, *m2.se, opts.alpha, feas2);
  if (fit.p11.se) rep.ci1_p11 = normal_ci(fit.p11.value, *fit.p11.se, opts.alpha, feas11);
  rep.ci2_p1 = lr_ci_marginal(data, mle, MarginSelect::first, opts.alpha);
  rep.ci2_p2 = lr_ci_marginal(data, mle, MarginSelect::second, opts.alpha);
  rep.ci2_p11 = lr_ci_p11(data, mle, opts.alpha);
  return rep;
}

}  // namespace margjoint
