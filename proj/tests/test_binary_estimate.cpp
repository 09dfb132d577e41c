#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "margjoint/binary_estimate.hpp"
#include "margjoint/binary_sim.hpp"
#include "margjoint/fixture.hpp"
#include "oracles.hpp"

using namespace margjoint;

TEST_CASE("EstimateOptions validation") {
  EstimateOptions o;
  REQUIRE_NOTHROW(o.validate());
  o.grid_points = 2;
  REQUIRE_THROWS_AS(o.validate(), std::invalid_argument);
  o = {};
  o.tol = 0.0;
  REQUIRE_THROWS_AS(o.validate(), std::invalid_argument);
  o = {};
  o.alpha = 1.0;
  REQUIRE_THROWS_AS(o.validate(), std::invalid_argument);
  o = {};
  o.boundary_eps = 0.1;
  REQUIRE_THROWS_AS(o.validate(), std::invalid_argument);
}

TEST_CASE("marginal estimates are pooled fractions") {
  const SummaryCollection data = clinical_fixture();
  const auto [m1, m2] = estimate_marginals(data);
  REQUIRE(m1.value == 20096.0 / 28894.0);
  REQUIRE(m2.value == 20898.0 / 28894.0);
  REQUIRE(*m1.se == std::sqrt(m1.value * (1.0 - m1.value) / 28894.0));
  REQUIRE_FALSE(m1.boundary);

  const SummaryCollection tiny({{4, 1, 3}});
  const auto [t1, t2] = estimate_marginals(tiny);
  REQUIRE(t1.value == 0.25);
  REQUIRE(t2.value == 0.75);
}

TEST_CASE("feasible interval for the joint probability") {
  const Interval a = p11_feasible_interval(0.35, 0.60);
  REQUIRE(a.lo == 0.0);
  REQUIRE(a.hi == 0.35);
  const Interval b = p11_feasible_interval(0.8, 0.77);
  REQUIRE_THAT(b.lo, Catch::Matchers::WithinAbs(0.57, 1e-15));
  REQUIRE(b.hi == 0.77);
}

TEST_CASE("profile log-likelihood pins margins at their MLEs") {
  const SummaryCollection data({{10, 4, 6}, {8, 3, 5}});
  const auto [m1, m2] = estimate_marginals(data);
  const double v = 0.2;
  REQUIRE(profile_loglik_p11(data, v) ==
          log_likelihood(data, JointBinaryParams(m1.value, m2.value, v)));
  REQUIRE_THROWS_AS(profile_loglik_p11(data, 0.9), std::domain_error);
  REQUIRE_THROWS_AS(profile_loglik_p11(data, -0.1), std::domain_error);
}

TEST_CASE("joint MLE agrees with a dense profile grid") {
  int checked = 0;
  for (std::uint64_t seed = 1; seed <= 40 && checked < 5; ++seed) {
    const Scenario sc{JointBinaryParams(0.45, 0.55, 0.30), 3, 15, 25, 1, seed, {}};
    const SummaryCollection data = generate_summary_dataset(sc, 0);
    const auto [m1, m2] = estimate_marginals(data);
    if (m1.value <= 0.05 || m2.value <= 0.05) continue;

    const PointEstimate fit = estimate_p11(data);
    if (fit.boundary || !fit.se) continue;
    ++checked;

    const EstimateOptions opts;
    const Interval raw = p11_feasible_interval(m1.value, m2.value);
    const double lo = std::max(opts.boundary_eps, raw.lo + opts.boundary_eps);
    const double hi = raw.hi - opts.boundary_eps;
    auto f = [&](double v) {
      return log_likelihood(data, JointBinaryParams(m1.value, m2.value, v));
    };
    const double oracle = oracles::dense_grid_argmax(f, lo, hi);
    REQUIRE_THAT(fit.value, Catch::Matchers::WithinAbs(oracle, 2e-7));

    // the score vanishes at an interior optimum
    const JointBinaryParams at(m1.value, m2.value, fit.value);
    const double g = d1_loglik_dp11(data, at);
    const double h = d2_loglik_dp11(data, at);
    REQUIRE(std::abs(g) <= std::abs(h) * 1e-5);

    // repeated calls are bitwise stable
    REQUIRE(estimate_p11(data).value == fit.value);
  }
  REQUIRE(checked == 5);
}

TEST_CASE("clinical fixture point estimates") {
  const SummaryCollection data = clinical_fixture();
  const EstimateReport rep = full_estimate(data);

  REQUIRE_THAT(rep.p11.value, Catch::Matchers::WithinAbs(0.4794, 1e-3));
  REQUIRE(rep.p11.se.has_value());
  REQUIRE(*rep.p11.se > 0.0);
  REQUIRE_FALSE(rep.p11.boundary);

  REQUIRE(rep.ci1_p11.has_value());
  REQUIRE(rep.ci1_p11->contains(0.4832));
  REQUIRE(rep.ci2_p11.contains(0.4832));
  REQUIRE(rep.ci2_p11.method == IntervalMethod::likelihood_ratio);
  REQUIRE(rep.ci1_p11->method == IntervalMethod::normal);

  REQUIRE_THAT(rep.phi,
               Catch::Matchers::WithinAbs(
                   phi_coefficient({rep.p1.value, rep.p2.value, rep.p11.value}), 0.0));
  REQUIRE(rep.loglik_at_mle ==
          log_likelihood(data, {rep.p1.value, rep.p2.value, rep.p11.value}));
  REQUIRE(rep.ci2_p1.contains(rep.p1.value));
  REQUIRE(rep.ci2_p2.contains(rep.p2.value));
}

TEST_CASE("boundary data pin the joint estimate") {
  // identical margins study by study force maximal overlap
  const SummaryCollection data({{10, 8, 8}, {10, 7, 7}});
  const PointEstimate fit = estimate_p11(data);
  REQUIRE(fit.boundary);
  const auto [m1, m2] = estimate_marginals(data);
  REQUIRE_THAT(fit.value, Catch::Matchers::WithinAbs(std::min(m1.value, m2.value), 1e-6));
  // the binding statistic is min(p1, p2), so its binomial SE is reported
  REQUIRE(fit.se.has_value());
  REQUIRE(*fit.se == std::sqrt(0.75 * 0.25 / 20.0));
}

TEST_CASE("a binding positive lower bound reports its binomial SE") {
  // margins sum past one while the data favor minimal overlap
  const SummaryCollection data({{10, 7, 5}, {10, 8, 4}});
  const PointEstimate fit = estimate_p11(data);
  REQUIRE(fit.boundary);
  REQUIRE_THAT(fit.value, Catch::Matchers::WithinAbs(0.2, 1e-6));
  REQUIRE(fit.se.has_value());
  // the bound 0.75 + 0.45 - 1 carries rounding, so compare with a tolerance
  REQUIRE_THAT(*fit.se, Catch::Matchers::WithinRel(std::sqrt(0.2 * 0.8 / 20.0), 1e-12));
}

TEST_CASE("a saturated margin collapses the feasible interval") {
  const SummaryCollection data({{5, 5, 3}});
  const PointEstimate fit = estimate_p11(data);
  REQUIRE(fit.boundary);
  REQUIRE_FALSE(fit.se.has_value());
  REQUIRE_THAT(fit.value, Catch::Matchers::WithinAbs(0.6, 1e-15));
}

TEST_CASE("a vanishing margin is rejected") {
  const SummaryCollection data({{10, 0, 5}});
  REQUIRE_THROWS_AS(estimate_p11(data), std::domain_error);
}

TEST_CASE("normal quantile and chi-square threshold") {
  REQUIRE_THAT(normal_quantile(0.975),
               Catch::Matchers::WithinAbs(1.959963984540054, 1e-12));
  REQUIRE_THAT(normal_quantile(0.975),
               Catch::Matchers::WithinAbs(oracles::normal_quantile(0.975), 1e-10));
  REQUIRE_THAT(normal_quantile(0.005),
               Catch::Matchers::WithinAbs(oracles::normal_quantile(0.005), 1e-9));
  REQUIRE_THAT(chi_square1_quantile(0.95),
               Catch::Matchers::WithinAbs(oracles::chi2_1_quantile(0.95), 1e-9));
  REQUIRE_THAT(chi_square1_quantile(0.95),
               Catch::Matchers::WithinAbs(3.841458820694124, 1e-10));
  REQUIRE_THROWS_AS(normal_quantile(0.0), std::domain_error);
  REQUIRE_THROWS_AS(normal_quantile(1.0), std::domain_error);
}

TEST_CASE("Wald interval construction and clipping") {
  const IntervalEstimate ci = normal_ci(0.5, 0.1, 0.05, {0.0, 1.0});
  const double z = 1.959963984540054;
  REQUIRE_THAT(ci.lower, Catch::Matchers::WithinAbs(0.5 - z * 0.1, 1e-12));
  REQUIRE_THAT(ci.upper, Catch::Matchers::WithinAbs(0.5 + z * 0.1, 1e-12));
  REQUIRE_FALSE(ci.clipped_low);
  REQUIRE_FALSE(ci.clipped_high);
  REQUIRE_THAT(ci.width(), Catch::Matchers::WithinAbs(2.0 * z * 0.1, 1e-12));

  const IntervalEstimate clipped = normal_ci(0.5, 0.1, 0.05, {0.45, 0.55});
  REQUIRE(clipped.lower == 0.45);
  REQUIRE(clipped.upper == 0.55);
  REQUIRE(clipped.clipped_low);
  REQUIRE(clipped.clipped_high);

  REQUIRE_THROWS_AS(normal_ci(0.5, 0.0, 0.05, {0.0, 1.0}), std::invalid_argument);
  REQUIRE_THROWS_AS(normal_ci(0.5, 0.1, 0.0, {0.0, 1.0}), std::invalid_argument);
  REQUIRE_THROWS_AS(normal_ci(0.5, 0.1, 0.05, {1.0, 0.0}), std::invalid_argument);
}

TEST_CASE("likelihood-ratio interval endpoints sit on the threshold") {
  const SummaryCollection data = clinical_fixture();
  const EstimateReport rep = full_estimate(data);
  const JointBinaryParams mle(rep.p1.value, rep.p2.value, rep.p11.value);

  const IntervalEstimate ci = rep.ci2_p11;
  REQUIRE(ci.contains(rep.p11.value));
  REQUIRE_FALSE(ci.clipped_low);
  REQUIRE_FALSE(ci.clipped_high);

  const double lmax = log_likelihood(data, mle);
  const double threshold = chi_square1_quantile(0.95);
  auto lambda = [&](double v) {
    return -2.0 * (log_likelihood(data, JointBinaryParams(mle.p1, mle.p2, v)) - lmax);
  };
  REQUIRE_THAT(lambda(ci.lower), Catch::Matchers::WithinRel(threshold, 1e-3));
  REQUIRE_THAT(lambda(ci.upper), Catch::Matchers::WithinRel(threshold, 1e-3));
  REQUIRE_THAT(lambda(rep.p11.value), Catch::Matchers::WithinAbs(0.0, 1e-8));

  // nested in alpha
  EstimateOptions narrow;
  narrow.alpha = 0.2;
  const IntervalEstimate inner = lr_ci_p11(data, mle, narrow.alpha);
  REQUIRE(inner.lower >= ci.lower);
  REQUIRE(inner.upper <= ci.upper);
  REQUIRE(inner.width() < ci.width());
}

TEST_CASE("likelihood-ratio intervals for the margins respect feasibility") {
  const SummaryCollection data = clinical_fixture();
  const EstimateReport rep = full_estimate(data);
  const JointBinaryParams mle(rep.p1.value, rep.p2.value, rep.p11.value);

  const IntervalEstimate c1 = lr_ci_marginal(data, mle, MarginSelect::first, 0.05);
  REQUIRE(c1.contains(mle.p1));
  REQUIRE(c1.lower >= mle.p11);
  REQUIRE(c1.upper <= std::min(1.0, 1.0 - mle.p2 + mle.p11));

  const IntervalEstimate c2 = lr_ci_marginal(data, mle, MarginSelect::second, 0.05);
  REQUIRE(c2.contains(mle.p2));

  REQUIRE_THROWS_AS(lr_ci_marginal(data, mle, MarginSelect::first, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(lr_ci_p11(data, mle, 1.0), std::invalid_argument);
}
