#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "binary_estimate.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace margjoint {

// Four-cell multinomial via sequential conditional binomials; the last cell
// absorbs the remainder, so the counts always sum to n.
inline std::array<std::int64_t, 4> sample_multinomial(SplitMix64& rng, std::int64_t n,
                                                      const std::array<double, 4>& probs) {
  if (n < 0) throw std::invalid_argument("sample_multinomial: n must be >= 0");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p))
      throw std::invalid_argument("sample_multinomial: cell probabilities must be >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw std::invalid_argument("sample_multinomial: cell probabilities must sum to 1");

  std::array<std::int64_t, 4> counts{};
  std::int64_t remaining = n;
  double rest = 1.0;
  for (int c = 0; c < 3 && remaining > 0; ++c) {
    const double pi = rest > 0.0 ? std::min(1.0, probs[static_cast<std::size_t>(c)] / rest) : 0.0;
    std::binomial_distribution<std::int64_t> dist(remaining, pi);
    counts[static_cast<std::size_t>(c)] = dist(rng);
    remaining -= counts[static_cast<std::size_t>(c)];
    rest -= probs[static_cast<std::size_t>(c)];
  }
  counts[3] = remaining;
  return counts;
}

struct Scenario {
  JointBinaryParams truth;
  std::int64_t k = 10;
  std::int64_t n_min = 100;
  std::int64_t n_max = 200;
  std::int64_t reps = 1000;
  std::uint64_t seed = 0;
  std::optional<double> extreme_inflate;   // multiplies the first study's drawn size

  void validate() const {
    if (k < 1) throw std::invalid_argument("Scenario: k must be >= 1");
    if (n_min < 1 || n_max < n_min)
      throw std::invalid_argument("Scenario: need 1 <= n_min <= n_max");
    if (reps < 1) throw std::invalid_argument("Scenario: reps must be >= 1");
    if (extreme_inflate && (!(*extreme_inflate >= 1.0) || !std::isfinite(*extreme_inflate)))
      throw std::invalid_argument("Scenario: extreme_inflate must be >= 1");
  }
};

// One synthetic dataset. Draws come from the substream keyed by
// (seed, rep_index), so replication r is identical no matter how many
// replications run or on which thread.
inline SummaryCollection generate_summary_dataset(const Scenario& sc, std::uint64_t rep_index) {
  sc.validate();
  SplitMix64 rng = SplitMix64::substream(sc.seed, rep_index);
  const std::array<double, 4> cells{sc.truth.cell11(), sc.truth.cell10(), sc.truth.cell01(),
                                    sc.truth.cell00()};
  std::vector<MarginalSummary> records;
  records.reserve(static_cast<std::size_t>(sc.k));
  for (std::int64_t i = 0; i < sc.k; ++i) {
    std::int64_t n = uniform_int(rng, sc.n_min, sc.n_max);
    if (i == 0 && sc.extreme_inflate)
      n = std::llround(static_cast<double>(n) * *sc.extreme_inflate);
    const auto counts = sample_multinomial(rng, n, cells);
    records.emplace_back(n, counts[0] + counts[1], counts[0] + counts[2]);
  }
  return SummaryCollection(std::move(records));
}

struct RepRecord {
  bool failed = false;
  double estimate = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> se;
  bool boundary = false;
  std::optional<IntervalEstimate> ci1;   // absent when the SE is unavailable
  std::optional<IntervalEstimate> ci2;
};

struct ScenarioSummary {
  std::int64_t reps_total = 0;
  std::int64_t failures = 0;
  std::int64_t se_unavailable = 0;   // succeeded reps without a curvature SE
  std::int64_t boundary_count = 0;
  double mean_estimate = std::numeric_limits<double>::quiet_NaN();
  double median_estimate = std::numeric_limits<double>::quiet_NaN();
  double sd_estimate = std::numeric_limits<double>::quiet_NaN();
  double mean_bias = std::numeric_limits<double>::quiet_NaN();
  double mean_se = std::numeric_limits<double>::quiet_NaN();
  double se_bias = std::numeric_limits<double>::quiet_NaN();   // mean_se - sd_estimate
  double ci1_coverage = std::numeric_limits<double>::quiet_NaN();
  double ci1_mean_width = std::numeric_limits<double>::quiet_NaN();
  double ci2_coverage = std::numeric_limits<double>::quiet_NaN();
  double ci2_mean_width = std::numeric_limits<double>::quiet_NaN();
  std::int64_t ci1_clipped = 0;
  std::int64_t ci2_clipped = 0;
};

struct ScenarioResult {
  Scenario scenario;
  std::vector<RepRecord> reps;
  ScenarioSummary summary;
};

namespace detail {

// CI1 aggregates run over reps whose SE exists; CI2 aggregates over all
// succeeded reps.
inline ScenarioSummary summarize_reps(const std::vector<RepRecord>& reps, const Scenario& sc) {
  ScenarioSummary s;
  s.reps_total = static_cast<std::int64_t>(reps.size());

  std::vector<double> est;
  std::vector<double> ses;
  std::vector<double> w1;
  std::vector<double> w2;
  std::int64_t cover1 = 0;
  std::int64_t cover2 = 0;
  for (const RepRecord& r : reps) {
    if (r.failed) {
      ++s.failures;
      continue;
    }
    est.push_back(r.estimate);
    if (r.boundary) ++s.boundary_count;
    if (r.se) {
      ses.push_back(*r.se);
    } else {
      ++s.se_unavailable;
    }
    if (r.ci1) {
      if (r.ci1->contains(sc.truth.p11)) ++cover1;
      w1.push_back(r.ci1->width());
      if (r.ci1->clipped_low || r.ci1->clipped_high) ++s.ci1_clipped;
    }
    if (r.ci2) {
      if (r.ci2->contains(sc.truth.p11)) ++cover2;
      w2.push_back(r.ci2->width());
      if (r.ci2->clipped_low || r.ci2->clipped_high) ++s.ci2_clipped;
    }
  }

  if (!est.empty()) {
    s.mean_estimate = mean_of(est);
    s.median_estimate = median_of(est);
    s.mean_bias = s.mean_estimate - sc.truth.p11;
    if (est.size() >= 2) s.sd_estimate = sample_sd(est);
  }
  if (!ses.empty()) {
    s.mean_se = mean_of(ses);
    if (est.size() >= 2) s.se_bias = s.mean_se - s.sd_estimate;
  }
  if (!w1.empty()) {
    s.ci1_coverage = static_cast<double>(cover1) / static_cast<double>(w1.size());
    s.ci1_mean_width = mean_of(w1);
  }
  if (!w2.empty()) {
    s.ci2_coverage = static_cast<double>(cover2) / static_cast<double>(w2.size());
    s.ci2_mean_width = mean_of(w2);
  }
  return s;
}

}  // namespace detail

// Generates and fits `reps` datasets. Replications are farmed out to
// `workers` threads; per-rep seeding makes the result identical for any
// worker count. Reps whose fit throws are recorded as failures, not
// propagated.
inline ScenarioResult run_scenario(const Scenario& sc, const EstimateOptions& opts = {},
                                   int workers = 1) {
  sc.validate();
  opts.validate();
  ScenarioResult result{sc, std::vector<RepRecord>(static_cast<std::size_t>(sc.reps)), {}};
  parallel_for(sc.reps, workers, [&](std::int64_t r) {
    RepRecord& rec = result.reps[static_cast<std::size_t>(r)];
    try {
      const SummaryCollection data = generate_summary_dataset(sc, static_cast<std::uint64_t>(r));
      const auto [m1, m2] = estimate_marginals(data);
      const detail::ProfileFit fit = detail::estimate_p11_fit(data, opts);
      rec.estimate = fit.p11.value;
      rec.se = fit.p11.se;
      rec.boundary = fit.p11.boundary;
      if (rec.se)
        rec.ci1 = normal_ci(rec.estimate, *rec.se, opts.alpha,
                            p11_feasible_interval(m1.value, m2.value));
      rec.ci2 = lr_ci_p11(data, JointBinaryParams(m1.value, m2.value, rec.estimate), opts.alpha);
    } catch (const std::exception&) {
      rec = RepRecord{};
      rec.failed = true;
    }
  });
  result.summary = detail::summarize_reps(result.reps, sc);
  return result;
}

struct DiagnosticsBundle {
  double mean = 0.0;
  double sd = 0.0;
  std::vector<double> bin_edges;             // bins + 1 monotone edges
  std::vector<std::int64_t> bin_counts;      // counts sum to the sample size
  std::vector<double> qq_theoretical;        // normal quantiles at (i + 0.5) / m
  std::vector<double> qq_sample;             // sorted standardized estimates
};

// Histogram and normal QQ data for the successful estimates of a run.
inline DiagnosticsBundle diagnostics(const ScenarioResult& result, std::int64_t bins = 20) {
  if (bins < 1) throw std::invalid_argument("diagnostics: bins must be >= 1");
  std::vector<double> est;
  for (const RepRecord& r : result.reps)
    if (!r.failed) est.push_back(r.estimate);
  if (est.size() < 2) throw std::domain_error("diagnostics: need at least two successful reps");

  DiagnosticsBundle d;
  d.mean = mean_of(est);
  d.sd = sample_sd(est);
  if (!(d.sd > 0.0)) throw std::domain_error("diagnostics: estimates are all equal");

  std::sort(est.begin(), est.end());
  const double lo = est.front();
  const double hi = est.back();
  d.bin_edges.resize(static_cast<std::size_t>(bins) + 1);
  d.bin_counts.assign(static_cast<std::size_t>(bins), 0);
  for (std::int64_t i = 0; i <= bins; ++i)
    d.bin_edges[static_cast<std::size_t>(i)] =
        lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  for (double v : est) {
    auto idx = static_cast<std::int64_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
    idx = std::clamp<std::int64_t>(idx, 0, bins - 1);
    ++d.bin_counts[static_cast<std::size_t>(idx)];
  }

  const std::size_t m = est.size();
  d.qq_theoretical.resize(m);
  d.qq_sample.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    d.qq_theoretical[i] =
        normal_quantile((static_cast<double>(i) + 0.5) / static_cast<double>(m));
    d.qq_sample[i] = (est[i] - d.mean) / d.sd;
  }
  return d;
}

}  // namespace margjoint
