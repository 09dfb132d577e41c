#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "margjoint/binary_sim.hpp"
#include "margjoint/math.hpp"

using namespace margjoint;

TEST_CASE("multinomial sampler basics") {
  SplitMix64 rng(3);
  const std::array<double, 4> probs{0.25, 0.10, 0.35, 0.30};

  for (int i = 0; i < 100; ++i) {
    const auto counts = sample_multinomial(rng, 57, probs);
    REQUIRE(counts[0] + counts[1] + counts[2] + counts[3] == 57);
    for (auto c : counts) REQUIRE(c >= 0);
  }

  const auto zero = sample_multinomial(rng, 0, probs);
  REQUIRE(zero == std::array<std::int64_t, 4>{0, 0, 0, 0});

  const auto point = sample_multinomial(rng, 12, {0.0, 1.0, 0.0, 0.0});
  REQUIRE(point == std::array<std::int64_t, 4>{0, 12, 0, 0});

  REQUIRE_THROWS_AS(sample_multinomial(rng, -1, probs), std::invalid_argument);
  REQUIRE_THROWS_AS(sample_multinomial(rng, 5, {0.5, 0.5, 0.5, 0.5}), std::invalid_argument);
  REQUIRE_THROWS_AS(sample_multinomial(rng, 5, {-0.1, 0.5, 0.3, 0.3}), std::invalid_argument);

  // cell frequencies track the probabilities
  std::array<double, 4> tally{};
  const int draws = 400;
  for (int i = 0; i < draws; ++i) {
    const auto counts = sample_multinomial(rng, 100, probs);
    for (int c = 0; c < 4; ++c) tally[static_cast<std::size_t>(c)] += static_cast<double>(counts[static_cast<std::size_t>(c)]);
  }
  for (int c = 0; c < 4; ++c)
    REQUIRE_THAT(tally[static_cast<std::size_t>(c)] / (100.0 * draws),
                 Catch::Matchers::WithinAbs(probs[static_cast<std::size_t>(c)], 0.01));
}

TEST_CASE("scenario validation") {
  Scenario sc{JointBinaryParams(0.35, 0.60, 0.25), 10, 100, 200, 50, 1, {}};
  REQUIRE_NOTHROW(sc.validate());
  sc.k = 0;
  REQUIRE_THROWS_AS(sc.validate(), std::invalid_argument);
  sc.k = 10;
  sc.n_min = 300;
  REQUIRE_THROWS_AS(sc.validate(), std::invalid_argument);
  sc.n_min = 100;
  sc.reps = 0;
  REQUIRE_THROWS_AS(sc.validate(), std::invalid_argument);
  sc.reps = 50;
  sc.extreme_inflate = 0.5;
  REQUIRE_THROWS_AS(sc.validate(), std::invalid_argument);
  sc.extreme_inflate = 100.0;
  REQUIRE_NOTHROW(sc.validate());
}

TEST_CASE("dataset generation is keyed by (seed, rep)") {
  const Scenario sc{JointBinaryParams(0.35, 0.60, 0.25), 8, 40, 90, 1, 12345, {}};
  const SummaryCollection a = generate_summary_dataset(sc, 3);
  const SummaryCollection b = generate_summary_dataset(sc, 3);
  REQUIRE(a.size() == 8);
  REQUIRE(a.total_n() == b.total_n());
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].n == b[i].n);
    REQUIRE(a[i].x == b[i].x);
    REQUIRE(a[i].y == b[i].y);
  }

  const SummaryCollection c = generate_summary_dataset(sc, 4);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].n != c[i].n || a[i].x != c[i].x || a[i].y != c[i].y) any_diff = true;
  REQUIRE(any_diff);

  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].n >= 40);
    REQUIRE(a[i].n <= 90);
    REQUIRE(a[i].x >= 0);
    REQUIRE(a[i].x <= a[i].n);
    REQUIRE(a[i].y <= a[i].n);
  }
}

TEST_CASE("margin frequencies track the truth") {
  const Scenario sc{JointBinaryParams(0.35, 0.60, 0.25), 200, 80, 120, 1, 77, {}};
  const SummaryCollection data = generate_summary_dataset(sc, 0);
  const double p1 = static_cast<double>(data.total_x()) / static_cast<double>(data.total_n());
  const double p2 = static_cast<double>(data.total_y()) / static_cast<double>(data.total_n());
  REQUIRE_THAT(p1, Catch::Matchers::WithinAbs(0.35, 0.02));
  REQUIRE_THAT(p2, Catch::Matchers::WithinAbs(0.60, 0.02));
}

TEST_CASE("extreme inflation applies to the first study only") {
  Scenario sc{JointBinaryParams(0.35, 0.60, 0.25), 5, 100, 200, 1, 9, {}};
  sc.extreme_inflate = 100.0;
  const SummaryCollection data = generate_summary_dataset(sc, 0);
  REQUIRE(data[0].n >= 10000);
  REQUIRE(data[0].n <= 20000);
  for (std::size_t i = 1; i < data.size(); ++i) {
    REQUIRE(data[i].n >= 100);
    REQUIRE(data[i].n <= 200);
  }
}

TEST_CASE("scenario run produces sane aggregates") {
  const Scenario sc{JointBinaryParams(0.35, 0.60, 0.25), 20, 50, 100, 150, 7, {}};
  const ScenarioResult result = run_scenario(sc);

  REQUIRE(result.reps.size() == 150);
  REQUIRE(result.summary.reps_total == 150);
  REQUIRE(result.summary.failures == 0);
  REQUIRE(result.summary.se_unavailable <= 3);
  REQUIRE(result.summary.boundary_count <= 7);

  REQUIRE_THAT(result.summary.mean_estimate, Catch::Matchers::WithinAbs(0.25, 0.02));
  REQUIRE_THAT(result.summary.median_estimate, Catch::Matchers::WithinAbs(0.25, 0.02));
  REQUIRE_THAT(result.summary.mean_bias,
               Catch::Matchers::WithinAbs(result.summary.mean_estimate - 0.25, 1e-12));
  REQUIRE(result.summary.sd_estimate > 0.0);
  REQUIRE(result.summary.mean_se > 0.0);
  REQUIRE(std::abs(result.summary.se_bias) < 0.5 * result.summary.sd_estimate);

  REQUIRE(result.summary.ci1_coverage >= 0.85);
  REQUIRE(result.summary.ci1_coverage <= 1.0);
  REQUIRE(result.summary.ci2_coverage >= 0.85);
  REQUIRE(result.summary.ci2_coverage <= 1.0);
  REQUIRE(result.summary.ci1_mean_width > 0.0);
  REQUIRE(result.summary.ci2_mean_width > 0.0);

  for (const RepRecord& r : result.reps) {
    REQUIRE_FALSE(r.failed);
    REQUIRE(r.ci2.has_value());
    if (r.se) {
      REQUIRE(r.ci1.has_value());
      REQUIRE(r.ci1->contains(r.estimate));
    }
    REQUIRE(r.ci2->lower <= r.estimate + 1e-8);
    REQUIRE(r.ci2->upper >= r.estimate - 1e-8);
  }
}

TEST_CASE("worker count does not change results") {
  const Scenario sc{JointBinaryParams(0.35, 0.60, 0.25), 10, 40, 80, 40, 21, {}};
  const ScenarioResult serial = run_scenario(sc, {}, 1);
  const ScenarioResult threaded = run_scenario(sc, {}, 3);

  REQUIRE(serial.reps.size() == threaded.reps.size());
  for (std::size_t i = 0; i < serial.reps.size(); ++i) {
    const RepRecord& a = serial.reps[i];
    const RepRecord& b = threaded.reps[i];
    REQUIRE(a.failed == b.failed);
    if (a.failed) continue;
    REQUIRE(a.estimate == b.estimate);
    REQUIRE(a.se.has_value() == b.se.has_value());
    if (a.se) REQUIRE(*a.se == *b.se);
    REQUIRE(a.ci2->lower == b.ci2->lower);
    REQUIRE(a.ci2->upper == b.ci2->upper);
  }
  REQUIRE(serial.summary.mean_estimate == threaded.summary.mean_estimate);
  REQUIRE(serial.summary.ci2_coverage == threaded.summary.ci2_coverage);
}

TEST_CASE("spread of the estimate shrinks with more studies") {
  const Scenario small{JointBinaryParams(0.35, 0.60, 0.25), 5, 50, 100, 120, 5, {}};
  const Scenario big{JointBinaryParams(0.35, 0.60, 0.25), 40, 50, 100, 120, 5, {}};
  const ScenarioResult rs = run_scenario(small);
  const ScenarioResult rb = run_scenario(big);
  REQUIRE(rb.summary.sd_estimate < rs.summary.sd_estimate);
}

TEST_CASE("fit failures are recorded, not propagated") {
  // a tiny margin often draws x = 0, which the estimator rejects
  const Scenario sc{JointBinaryParams(0.02, 0.5, 0.01), 1, 5, 10, 200, 3, {}};
  const ScenarioResult result = run_scenario(sc);
  REQUIRE(result.summary.failures > 0);
  REQUIRE(result.summary.failures < 200);
  std::int64_t failed = 0;
  for (const RepRecord& r : result.reps)
    if (r.failed) {
      ++failed;
      REQUIRE_FALSE(r.ci2.has_value());
      REQUIRE(std::isnan(r.estimate));
    }
  REQUIRE(failed == result.summary.failures);
}

TEST_CASE("diagnostics bundle") {
  const Scenario sc{JointBinaryParams(0.35, 0.60, 0.25), 20, 50, 100, 150, 7, {}};
  const ScenarioResult result = run_scenario(sc);
  const DiagnosticsBundle d = diagnostics(result, 12);

  REQUIRE(d.bin_edges.size() == 13);
  REQUIRE(d.bin_counts.size() == 12);
  std::int64_t total = 0;
  for (auto c : d.bin_counts) total += c;
  REQUIRE(total == 150);
  for (std::size_t i = 1; i < d.bin_edges.size(); ++i)
    REQUIRE(d.bin_edges[i] > d.bin_edges[i - 1]);

  REQUIRE(d.qq_theoretical.size() == 150);
  REQUIRE(d.qq_sample.size() == 150);
  REQUIRE(std::is_sorted(d.qq_sample.begin(), d.qq_sample.end()));
  REQUIRE(pearson_correlation(d.qq_theoretical, d.qq_sample) > 0.95);

  REQUIRE_THROWS_AS(diagnostics(result, 0), std::invalid_argument);

  ScenarioResult broken{sc, std::vector<RepRecord>(5), {}};
  for (auto& r : broken.reps) r.failed = true;
  REQUIRE_THROWS_AS(diagnostics(broken, 10), std::domain_error);
}
