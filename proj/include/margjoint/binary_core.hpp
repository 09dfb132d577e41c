#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "math.hpp"

namespace margjoint {

// Per-study margins: n trials, x successes on the first outcome, y on the
// second. The joint success count z is never observed.
struct MarginalSummary {
  std::int64_t n;
  std::int64_t x;
  std::int64_t y;

  MarginalSummary(std::int64_t n_, std::int64_t x_, std::int64_t y_) : n(n_), x(x_), y(y_) {
    if (n < 1) throw std::invalid_argument("MarginalSummary: n must be >= 1");
    if (x < 0 || x > n) throw std::invalid_argument("MarginalSummary: x must be in [0, n]");
    if (y < 0 || y > n) throw std::invalid_argument("MarginalSummary: y must be in [0, n]");
  }

  // feasible window for the latent joint count; never empty given the bounds
  // on x and y
  std::int64_t z_low() const { return std::max<std::int64_t>(0, x + y - n); }
  std::int64_t z_high() const { return std::min(x, y); }
};

class SummaryCollection {
 public:
  explicit SummaryCollection(std::vector<MarginalSummary> records)
      : records_(std::move(records)) {
    if (records_.empty()) throw std::domain_error("SummaryCollection: needs at least one study");
    for (const MarginalSummary& r : records_) {
      total_n_ += r.n;
      total_x_ += r.x;
      total_y_ += r.y;
      max_n_ = std::max(max_n_, r.n);
    }
  }

  const std::vector<MarginalSummary>& records() const { return records_; }
  const MarginalSummary& operator[](std::size_t i) const { return records_[i]; }
  std::size_t size() const { return records_.size(); }
  std::int64_t total_n() const { return total_n_; }
  std::int64_t total_x() const { return total_x_; }
  std::int64_t total_y() const { return total_y_; }
  std::int64_t max_n() const { return max_n_; }

 private:
  std::vector<MarginalSummary> records_;
  std::int64_t total_n_ = 0;
  std::int64_t total_x_ = 0;
  std::int64_t total_y_ = 0;
  std::int64_t max_n_ = 0;
};

// Parameters of the bivariate binomial: the two marginal success
// probabilities and the joint success probability. Feasibility means all
// four cells of the implied 2x2 table are nonnegative.
struct JointBinaryParams {
  double p1;
  double p2;
  double p11;

  JointBinaryParams(double p1_, double p2_, double p11_) : p1(p1_), p2(p2_), p11(p11_) {
    constexpr double slack = 1e-12;
    if (!(p1 >= -slack && p1 <= 1.0 + slack) || !std::isfinite(p1))
      throw std::invalid_argument("JointBinaryParams: p1 must be in [0, 1]");
    if (!(p2 >= -slack && p2 <= 1.0 + slack) || !std::isfinite(p2))
      throw std::invalid_argument("JointBinaryParams: p2 must be in [0, 1]");
    if (!(p11 >= -slack) || !std::isfinite(p11))
      throw std::invalid_argument("JointBinaryParams: p11 must be >= 0");
    if (!(p11 <= std::min(p1, p2) + slack))
      throw std::invalid_argument("JointBinaryParams: p11 must be <= min(p1, p2)");
    if (!((1.0 - (p1 + p2)) + p11 >= -slack))
      throw std::invalid_argument("JointBinaryParams: 1 - p1 - p2 + p11 must be >= 0");
  }

  double cell11() const { return std::max(0.0, p11); }
  double cell10() const { return std::max(0.0, p1 - p11); }
  double cell01() const { return std::max(0.0, p2 - p11); }
  // grouped so that swapping (p1, p2) cannot change the rounding
  double cell00() const { return std::max(0.0, (1.0 - (p1 + p2)) + p11); }

  bool strictly_interior() const {
    return cell11() > 0.0 && cell10() > 0.0 && cell01() > 0.0 && cell00() > 0.0;
  }
};

// phi = (p11 - p1 p2) / sqrt(p1 (1-p1) p2 (1-p2))
inline double phi_coefficient(const JointBinaryParams& p) {
  if (!(p.p1 > 0.0 && p.p1 < 1.0 && p.p2 > 0.0 && p.p2 < 1.0))
    throw std::domain_error("phi_coefficient: both margins must be strictly inside (0, 1)");
  const double denom = std::sqrt((p.p1 * (1.0 - p.p1)) * (p.p2 * (1.0 - p.p2)));
  return (p.p11 - p.p1 * p.p2) / denom;
}

namespace detail {

struct CellLogs {
  double l11;
  double l10;
  double l01;
  double l00;
};

inline CellLogs cell_logs(const JointBinaryParams& p) {
  auto lg = [](double v) { return v > 0.0 ? std::log(v) : kNegInf; };
  return {lg(p.cell11()), lg(p.cell10()), lg(p.cell01()), lg(p.cell00())};
}

// Log of the complete-data multinomial term at latent count z. A zero cell
// with a positive count gives -inf; a zero count contributes nothing even
// when its cell is zero. Terms tied to the two margins are grouped into
// single commutative additions so swapping (x, p1) with (y, p2) is
// bit-exact.
inline double log_term(const MarginalSummary& r, std::int64_t z, const CellLogs& lp,
                       const LogGammaTable& lg) {
  const std::int64_t c10 = r.x - z;
  const std::int64_t c01 = r.y - z;
  const std::int64_t c00 = r.n - r.x - r.y + z;
  double t = lg[r.n] - lg[z] - lg[c00];
  t -= lg[c10] + lg[c01];
  t += (z == 0 ? 0.0 : static_cast<double>(z) * lp.l11) +
       (c00 == 0 ? 0.0 : static_cast<double>(c00) * lp.l00);
  t += (c10 == 0 ? 0.0 : static_cast<double>(c10) * lp.l10) +
       (c01 == 0 ? 0.0 : static_cast<double>(c01) * lp.l01);
  return t;
}

struct RecordEval {
  double logb;    // log observed-data likelihood of the record
  double ez;      // conditional mean of the latent count
  double var_z;   // conditional variance of the latent count
};

// Marginalizes the latent count over its feasible window. Log terms are
// buffered so the log-sum-exp can use the exact maximum; conditional
// moments are accumulated around the window midpoint.
inline RecordEval eval_record(const MarginalSummary& r, const JointBinaryParams& p,
                              const LogGammaTable& lg, bool need_moments) {
  const std::int64_t lo = r.z_low();
  const std::int64_t hi = r.z_high();
  const CellLogs lp = cell_logs(p);

  thread_local std::vector<double> terms;
  terms.clear();
  terms.reserve(static_cast<std::size_t>(hi - lo + 1));
  double max_term = kNegInf;
  for (std::int64_t z = lo; z <= hi; ++z) {
    const double t = log_term(r, z, lp, lg);
    terms.push_back(t);
    max_term = std::max(max_term, t);
  }

  RecordEval out{kNegInf, std::numeric_limits<double>::quiet_NaN(),
                 std::numeric_limits<double>::quiet_NaN()};
  if (max_term == kNegInf) return out;

  const std::int64_t zc = lo + (hi - lo) / 2;
  double sum_w = 0.0;
  double sum_wu = 0.0;
  double sum_wuu = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const double w = std::exp(terms[i] - max_term);
    sum_w += w;
    if (need_moments) {
      const double u = static_cast<double>(lo + static_cast<std::int64_t>(i) - zc);
      sum_wu += w * u;
      sum_wuu += w * u * u;
    }
  }
  out.logb = max_term + std::log(sum_w);
  if (need_moments) {
    const double m1 = sum_wu / sum_w;
    out.ez = static_cast<double>(zc) + m1;
    out.var_z = std::max(0.0, sum_wuu / sum_w - m1 * m1);
  }
  return out;
}

// Coefficients of the linear maps z -> dlog(term)/dp11 and its negated
// derivative in p11; both are affine in z for fixed margins.
struct ScoreCoeffs {
  double base;    // E[delta] = base + slope * E[z]
  double slope;
  double lbase;   // E[lambda] = lbase + lslope * E[z]
  double lslope;
};

inline ScoreCoeffs score_coeffs(const MarginalSummary& r, const JointBinaryParams& p) {
  const double c11 = p.cell11();
  const double c10 = p.cell10();
  const double c01 = p.cell01();
  const double c00 = p.cell00();
  const double nx = static_cast<double>(r.x);
  const double ny = static_cast<double>(r.y);
  const double rest = static_cast<double>(r.n - r.x - r.y);
  // the 10/01 contributions are paired first so a margin swap cannot change the rounding
  ScoreCoeffs c;
  c.base = (-nx / c10 + -ny / c01) + rest / c00;
  c.slope = (1.0 / c10 + 1.0 / c01) + (1.0 / c11 + 1.0 / c00);
  c.lbase = (nx / (c10 * c10) + ny / (c01 * c01)) + rest / (c00 * c00);
  c.lslope = -(1.0 / (c10 * c10) + 1.0 / (c01 * c01)) + (1.0 / (c11 * c11) + 1.0 / (c00 * c00));
  return c;
}

inline void require_interior(const JointBinaryParams& p, const char* op) {
  if (!p.strictly_interior())
    throw std::domain_error(std::string(op) + ": requires all four cell probabilities > 0");
}

}  // namespace detail

// Log of one complete-data multinomial term; z must lie in the feasible
// window of the record.
inline double log_complete_term(const MarginalSummary& r, std::int64_t z,
                                const JointBinaryParams& p) {
  if (z < r.z_low() || z > r.z_high())
    throw std::domain_error("log_complete_term: z outside the feasible window");
  const auto table = LogGammaTable::shared(r.n);
  return detail::log_term(r, z, detail::cell_logs(p), *table);
}

// Log observed-data likelihood of a single record: latent count summed out
// in log space.
inline double log_observed_likelihood_single(const MarginalSummary& r,
                                             const JointBinaryParams& p) {
  const auto table = LogGammaTable::shared(r.n);
  return detail::eval_record(r, p, *table, false).logb;
}

// Collection log-likelihood. Record contributions are combined with exact
// summation, so any permutation of the records gives the identical double.
inline double log_likelihood(const SummaryCollection& data, const JointBinaryParams& p) {
  const auto table = LogGammaTable::shared(data.max_n());
  ExactSum sum;
  for (const MarginalSummary& r : data.records()) {
    const double lb = detail::eval_record(r, p, *table, false).logb;
    if (lb == kNegInf) return kNegInf;
    sum.add(lb);
  }
  return sum.value();
}

// Sum over records of the conditional expectation of the latent joint
// count given the observed margins.
inline double expected_latent_sum(const SummaryCollection& data, const JointBinaryParams& p) {
  detail::require_interior(p, "expected_latent_sum");
  const auto table = LogGammaTable::shared(data.max_n());
  ExactSum sum;
  for (const MarginalSummary& r : data.records())
    sum.add(detail::eval_record(r, p, *table, true).ez);
  return sum.value();
}

// First derivative of the collection log-likelihood in p11 with the margins
// held fixed: per record the conditional expectation of the complete-data
// score.
inline double d1_loglik_dp11(const SummaryCollection& data, const JointBinaryParams& p) {
  detail::require_interior(p, "d1_loglik_dp11");
  const auto table = LogGammaTable::shared(data.max_n());
  ExactSum sum;
  for (const MarginalSummary& r : data.records()) {
    const detail::RecordEval ev = detail::eval_record(r, p, *table, true);
    const detail::ScoreCoeffs c = detail::score_coeffs(r, p);
    sum.add(c.base + c.slope * ev.ez);
  }
  return sum.value();
}

// Second derivative in p11: per record slope^2 * Var[z | margins] minus the
// conditional mean of the complete-data curvature.
inline double d2_loglik_dp11(const SummaryCollection& data, const JointBinaryParams& p) {
  detail::require_interior(p, "d2_loglik_dp11");
  const auto table = LogGammaTable::shared(data.max_n());
  ExactSum sum;
  for (const MarginalSummary& r : data.records()) {
    const detail::RecordEval ev = detail::eval_record(r, p, *table, true);
    const detail::ScoreCoeffs c = detail::score_coeffs(r, p);
    sum.add(c.slope * c.slope * ev.var_z - (c.lbase + c.lslope * ev.ez));
  }
  return sum.value();
}

}  // namespace margjoint
