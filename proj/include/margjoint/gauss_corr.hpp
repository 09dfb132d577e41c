#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "math.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace margjoint {

// Per-study summary of two continuous endpoints: patient count, the two
// endpoint means, and the within-study variances of the endpoints.
struct ContinuousStudySummary {
  std::int64_t n;
  double m1;
  double m2;
  double s1;   // within-study variance, first endpoint
  double s2;   // within-study variance, second endpoint

  ContinuousStudySummary(std::int64_t n_, double m1_, double m2_, double s1_, double s2_)
      : n(n_), m1(m1_), m2(m2_), s1(s1_), s2(s2_) {
    if (n < 1) throw std::invalid_argument("ContinuousStudySummary: n must be >= 1");
    if (!std::isfinite(m1) || !std::isfinite(m2))
      throw std::invalid_argument("ContinuousStudySummary: means must be finite");
    if (!(s1 >= 0.0) || !(s2 >= 0.0) || !std::isfinite(s1) || !std::isfinite(s2))
      throw std::invalid_argument("ContinuousStudySummary: variances must be finite and >= 0");
  }
};

struct HierEstimates {
  double theta1 = 0.0;
  double theta2 = 0.0;
  double psi1 = 0.0;       // between-study spread, divisor J
  double psi2 = 0.0;
  double rho_star = 0.0;   // correlation of the study means
  std::vector<double> sigma1_sq;   // per-study error variances
  std::vector<double> sigma2_sq;
};

// Moment estimates of the hierarchical components from study summaries.
inline HierEstimates estimate_hier(const std::vector<ContinuousStudySummary>& studies) {
  if (studies.size() < 2) throw std::domain_error("estimate_hier: need at least two studies");
  const auto count = static_cast<double>(studies.size());

  HierEstimates est;
  std::vector<double> m1(studies.size());
  std::vector<double> m2(studies.size());
  est.sigma1_sq.resize(studies.size());
  est.sigma2_sq.resize(studies.size());
  for (std::size_t j = 0; j < studies.size(); ++j) {
    m1[j] = studies[j].m1;
    m2[j] = studies[j].m2;
    est.sigma1_sq[j] = studies[j].s1;
    est.sigma2_sq[j] = studies[j].s2;
  }
  est.theta1 = mean_of(m1);
  est.theta2 = mean_of(m2);

  ExactSum d1, d2;
  for (std::size_t j = 0; j < studies.size(); ++j) {
    d1.add((m1[j] - est.theta1) * (m1[j] - est.theta1));
    d2.add((m2[j] - est.theta2) * (m2[j] - est.theta2));
  }
  est.psi1 = std::sqrt(d1.value() / count);
  est.psi2 = std::sqrt(d2.value() / count);
  est.rho_star = pearson_correlation(m1, m2);
  return est;
}

struct CorrelationResult {
  double var1 = 0.0;
  double var2 = 0.0;
  double cov = 0.0;
  double rho_x = 0.0;
  std::optional<double> a;   // error-to-signal weight; defined when psi1 psi2 > 0
  std::optional<double> A;   // attenuation factor; defined when psi1 psi2 > 0
};

// Pooled patient-level correlation implied by the hierarchical components.
// rho is the within-study error correlation, which summaries alone cannot
// identify; callers choose the plug-in.
inline CorrelationResult rho_x(const HierEstimates& est, const std::vector<std::int64_t>& sizes,
                               double rho) {
  if (!(rho >= -1.0 && rho <= 1.0)) throw std::domain_error("rho_x: rho must be in [-1, 1]");
  if (sizes.size() != est.sigma1_sq.size() || sizes.size() != est.sigma2_sq.size())
    throw std::invalid_argument("rho_x: sizes do not match the study count");

  ExactSum sn, s1, s2, s12;
  for (std::size_t j = 0; j < sizes.size(); ++j) {
    if (sizes[j] < 1) throw std::invalid_argument("rho_x: study sizes must be >= 1");
    const double nj = static_cast<double>(sizes[j]);
    sn.add(nj);
    s1.add(nj * est.sigma1_sq[j]);
    s2.add(nj * est.sigma2_sq[j]);
    s12.add(nj * std::sqrt(est.sigma1_sq[j]) * std::sqrt(est.sigma2_sq[j]));
  }
  const double n = sn.value();
  const double w1 = s1.value() / n;
  const double w2 = s2.value() / n;
  const double w12 = s12.value() / n;

  CorrelationResult out;
  out.var1 = est.psi1 * est.psi1 + w1;
  out.var2 = est.psi2 * est.psi2 + w2;
  out.cov = est.rho_star * est.psi1 * est.psi2 + rho * w12;
  if (!(out.var1 > 0.0) || !(out.var2 > 0.0))
    throw std::domain_error("rho_x: a pooled variance is zero");
  out.rho_x = std::clamp(out.cov / std::sqrt(out.var1 * out.var2), -1.0, 1.0);
  if (est.psi1 > 0.0 && est.psi2 > 0.0) {
    out.a = w12 / (est.psi1 * est.psi2);
    out.A = std::sqrt((1.0 + w1 / (est.psi1 * est.psi1)) * (1.0 + w2 / (est.psi2 * est.psi2)));
  }
  return out;
}

struct GaussSimSettings {
  double theta1 = 175.0;
  double theta2 = 75.0;
  double psi1 = 7.0;
  double psi2 = 4.0;
  double rho_star = 0.85;
  double ig_shape1 = 3.0;
  double ig_rate1 = 2.0;
  double ig_shape2 = 2.0;
  double ig_rate2 = 0.5;
  std::int64_t groups = 50;
  std::int64_t group_size = 50;
  std::int64_t reps = 600;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(psi1 > 0.0 && psi2 > 0.0))
      throw std::invalid_argument("GaussSimSettings: psi must be > 0");
    if (!(rho_star >= -1.0 && rho_star <= 1.0))
      throw std::invalid_argument("GaussSimSettings: rho_star must be in [-1, 1]");
    if (!(ig_shape1 > 1.0 && ig_shape2 > 1.0))
      throw std::invalid_argument("GaussSimSettings: inverse-gamma shapes must be > 1");
    if (!(ig_rate1 > 0.0 && ig_rate2 > 0.0))
      throw std::invalid_argument("GaussSimSettings: inverse-gamma rates must be > 0");
    if (groups < 2) throw std::invalid_argument("GaussSimSettings: groups must be >= 2");
    if (group_size < 1) throw std::invalid_argument("GaussSimSettings: group_size must be >= 1");
    if (reps < 1) throw std::invalid_argument("GaussSimSettings: reps must be >= 1");
  }
};

// Study-level draws for one replication: correlated study means plus
// inverse-gamma error variances.
struct StudyDraws {
  std::vector<double> m1;
  std::vector<double> m2;
  std::vector<double> s1;
  std::vector<double> s2;
};

inline StudyDraws draw_study_data(SplitMix64& rng, const GaussSimSettings& set) {
  StudyDraws d;
  const auto groups = static_cast<std::size_t>(set.groups);
  d.m1.resize(groups);
  d.m2.resize(groups);
  d.s1.resize(groups);
  d.s2.resize(groups);
  for (std::size_t j = 0; j < groups; ++j) {
    const NormalPair z = correlated_normal_pair(rng, set.rho_star);
    d.m1[j] = set.theta1 + set.psi1 * z.first;
    d.m2[j] = set.theta2 + set.psi2 * z.second;
  }
  for (std::size_t j = 0; j < groups; ++j) d.s1[j] = inverse_gamma(rng, set.ig_shape1, set.ig_rate1);
  for (std::size_t j = 0; j < groups; ++j) d.s2[j] = inverse_gamma(rng, set.ig_shape2, set.ig_rate2);
  return d;
}

namespace detail {

inline std::vector<ContinuousStudySummary> draws_to_summaries(const StudyDraws& d,
                                                              std::int64_t group_size) {
  std::vector<ContinuousStudySummary> studies;
  studies.reserve(d.m1.size());
  for (std::size_t j = 0; j < d.m1.size(); ++j)
    studies.emplace_back(group_size, d.m1[j], d.m2[j], d.s1[j], d.s2[j]);
  return studies;
}

}  // namespace detail

// Formula route: hierarchical components estimated from the summaries, with
// the study-mean correlation standing in for the unidentified error
// correlation.
inline double formula_estimate_from_draws(const StudyDraws& d, std::int64_t group_size) {
  const HierEstimates est = estimate_hier(detail::draws_to_summaries(d, group_size));
  const std::vector<std::int64_t> sizes(d.m1.size(), group_size);
  return rho_x(est, sizes, est.rho_star).rho_x;
}

// Two-step route: reconstructs patient-level pairs around the drawn study
// means, with error correlation set to the estimated study-mean correlation,
// then takes the pooled Pearson correlation.
inline double two_step_estimate_from_draws(SplitMix64& rng, const StudyDraws& d,
                                           std::int64_t group_size) {
  const double rho_used = pearson_correlation(d.m1, d.m2);
  std::vector<double> x1;
  std::vector<double> x2;
  x1.reserve(d.m1.size() * static_cast<std::size_t>(group_size));
  x2.reserve(x1.capacity());
  for (std::size_t j = 0; j < d.m1.size(); ++j) {
    const double sd1 = std::sqrt(d.s1[j]);
    const double sd2 = std::sqrt(d.s2[j]);
    for (std::int64_t i = 0; i < group_size; ++i) {
      const NormalPair z = correlated_normal_pair(rng, rho_used);
      x1.push_back(d.m1[j] + sd1 * z.first);
      x2.push_back(d.m2[j] + sd2 * z.second);
    }
  }
  return pearson_correlation(x1, x2);
}

struct GaussSimResult {
  std::vector<double> estimates;   // NaN marks a failed replication
  std::int64_t failures = 0;
  double mean = std::numeric_limits<double>::quiet_NaN();
  double sd = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

template <typename PerRep>
GaussSimResult run_gauss_sim(const GaussSimSettings& set, int workers, PerRep&& per_rep) {
  set.validate();
  GaussSimResult result;
  result.estimates.assign(static_cast<std::size_t>(set.reps),
                          std::numeric_limits<double>::quiet_NaN());
  parallel_for(set.reps, workers, [&](std::int64_t r) {
    SplitMix64 rng = SplitMix64::substream(set.seed, static_cast<std::uint64_t>(r));
    try {
      result.estimates[static_cast<std::size_t>(r)] = per_rep(rng);
    } catch (const std::exception&) {
      // leave the NaN marker
    }
  });

  std::vector<double> ok;
  for (double v : result.estimates)
    if (std::isnan(v)) ++result.failures; else ok.push_back(v);
  if (!ok.empty()) result.mean = mean_of(ok);
  if (ok.size() >= 2) result.sd = sample_sd(ok);
  return result;
}

}  // namespace detail

inline GaussSimResult simulate_formula_based(const GaussSimSettings& set, int workers = 1) {
  return detail::run_gauss_sim(set, workers, [&](SplitMix64& rng) {
    const StudyDraws d = draw_study_data(rng, set);
    return formula_estimate_from_draws(d, set.group_size);
  });
}

inline GaussSimResult simulate_two_step(const GaussSimSettings& set, int workers = 1) {
  return detail::run_gauss_sim(set, workers, [&](SplitMix64& rng) {
    const StudyDraws d = draw_study_data(rng, set);
    return two_step_estimate_from_draws(rng, d, set.group_size);
  });
}

struct GroupSpread {
  double phi1;
  double phi2;
};

struct RelationResult {
  double rho_gen = 0.0;
  std::vector<std::vector<double>> rho_hat;   // [repeat][group]
};

// Generates per-group patient pairs at a common error correlation and
// records each group's raw sample correlation, repeated `repeats` times.
inline RelationResult rho_relation_experiment(double mu1, double mu2,
                                              const std::vector<GroupSpread>& spreads,
                                              double rho_gen,
                                              const std::vector<std::int64_t>& sizes,
                                              std::int64_t repeats, std::uint64_t seed) {
  if (!(rho_gen >= -1.0 && rho_gen <= 1.0))
    throw std::domain_error("rho_relation_experiment: rho_gen must be in [-1, 1]");
  if (spreads.empty() || spreads.size() != sizes.size())
    throw std::invalid_argument("rho_relation_experiment: spreads and sizes must match");
  for (const GroupSpread& g : spreads)
    if (!(g.phi1 > 0.0 && g.phi2 > 0.0))
      throw std::invalid_argument("rho_relation_experiment: spreads must be > 0");
  for (std::int64_t n : sizes)
    if (n < 2) throw std::invalid_argument("rho_relation_experiment: group sizes must be >= 2");
  if (repeats < 1) throw std::invalid_argument("rho_relation_experiment: repeats must be >= 1");

  RelationResult out;
  out.rho_gen = rho_gen;
  out.rho_hat.resize(static_cast<std::size_t>(repeats));
  for (std::int64_t t = 0; t < repeats; ++t) {
    SplitMix64 rng = SplitMix64::substream(seed, static_cast<std::uint64_t>(t));
    auto& row = out.rho_hat[static_cast<std::size_t>(t)];
    row.reserve(spreads.size());
    for (std::size_t j = 0; j < spreads.size(); ++j) {
      std::vector<double> x(static_cast<std::size_t>(sizes[j]));
      std::vector<double> y(static_cast<std::size_t>(sizes[j]));
      for (std::size_t i = 0; i < x.size(); ++i) {
        const NormalPair z = correlated_normal_pair(rng, rho_gen);
        x[i] = mu1 + spreads[j].phi1 * z.first;
        y[i] = mu2 + spreads[j].phi2 * z.second;
      }
      row.push_back(pearson_correlation(x, y));
    }
  }
  return out;
}

}  // namespace margjoint
