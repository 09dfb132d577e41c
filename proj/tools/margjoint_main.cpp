#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "margjoint/margjoint.hpp"

namespace {

using namespace margjoint;

// --out selects a file; otherwise the report lands on stdout
void emit(const std::optional<std::string>& out, const std::function<void(std::ostream&)>& fn) {
  if (out) {
    write_file(*out, fn);
  } else {
    fn(std::cout);
    std::cout.flush();
    if (!std::cout.good()) throw IoError("write to stdout failed");
  }
}

// MARGJOINT_WORKERS, when set, wins over --workers
int resolve_workers(int flag_value) {
  int workers = flag_value;
  if (const char* env = std::getenv("MARGJOINT_WORKERS")) {
    try {
      std::size_t used = 0;
      workers = std::stoi(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string("MARGJOINT_WORKERS is not an integer: ") + env);
    }
  }
  if (workers < 1) throw std::invalid_argument("worker count must be >= 1");
  return workers;
}

struct CommonOut {
  std::optional<std::string> out;
  std::string format = "json";
};

void add_output_flags(CLI::App* cmd, CommonOut& o) {
  cmd->add_option("--out", o.out, "output file (stdout when omitted)");
  cmd->add_option("--format", o.format, "output format")
      ->check(CLI::IsMember({"csv", "json"}));
}

struct BinaryEstimateArgs {
  std::optional<std::string> input;
  double alpha = 0.05;
  bool legacy_999 = false;
  CommonOut out;
};

int run_estimate_binary(const BinaryEstimateArgs& a) {
  SummaryCollection data = a.input ? parse_binary_csv_file(*a.input) : clinical_fixture();
  EstimateOptions opts;
  opts.alpha = a.alpha;
  const EstimateReport rep = full_estimate(data, opts);
  emit(a.out.out, [&](std::ostream& os) {
    if (a.out.format == "json")
      write_estimate_report_json(os, rep, a.legacy_999);
    else
      write_estimate_report_csv(os, rep, a.legacy_999);
  });
  return 0;
}

struct BinarySimArgs {
  std::string preset;
  double p1 = -1.0, p2 = -1.0, p11 = -1.0;
  std::int64_t k = 10;
  std::int64_t n_min = 0, n_max = 0;
  std::int64_t reps = 1000;
  std::uint64_t seed = 0;
  double alpha = 0.05;
  int workers = 1;
  std::optional<double> extreme_inflate;
  bool legacy_999 = false;
  std::optional<std::string> diagnostics_out;
  std::int64_t bins = 20;
  CommonOut out;
};

Scenario scenario_from_args(const BinarySimArgs& a) {
  double p1 = a.p1, p2 = a.p2, p11 = a.p11;
  std::int64_t n_min = a.n_min, n_max = a.n_max;
  const bool explicit_truth = p1 >= 0.0 || p2 >= 0.0 || p11 >= 0.0;

  if (!a.preset.empty()) {
    if (explicit_truth)
      throw std::invalid_argument("give either --preset or --p1/--p2/--p11, not both");
    const bool weak = a.preset.rfind("weak", 0) == 0;
    p1 = weak ? 0.35 : 0.80;
    p2 = weak ? 0.60 : 0.77;
    p11 = weak ? 0.25 : 0.75;
    const bool small = a.preset.find("small") != std::string::npos;
    if (n_min == 0) n_min = small ? 100 : 800;
    if (n_max == 0) n_max = small ? 200 : 1000;
  } else {
    if (!(p1 >= 0.0 && p2 >= 0.0 && p11 >= 0.0))
      throw std::invalid_argument("need --preset or all of --p1 --p2 --p11");
    if (n_min == 0 || n_max == 0)
      throw std::invalid_argument("need --n-min and --n-max with explicit parameters");
  }

  Scenario sc{JointBinaryParams(p1, p2, p11), a.k, n_min, n_max, a.reps, a.seed,
              a.extreme_inflate};
  sc.validate();
  return sc;
}

int run_simulate_binary(const BinarySimArgs& a) {
  const Scenario sc = scenario_from_args(a);
  EstimateOptions opts;
  opts.alpha = a.alpha;
  const ScenarioResult result = run_scenario(sc, opts, resolve_workers(a.workers));
  emit(a.out.out, [&](std::ostream& os) {
    if (a.out.format == "json")
      write_scenario_result_json(os, result, a.legacy_999);
    else
      write_scenario_result_csv(os, result, a.legacy_999);
  });
  if (a.diagnostics_out) {
    const DiagnosticsBundle d = diagnostics(result, a.bins);
    emit(a.diagnostics_out, [&](std::ostream& os) {
      if (a.out.format == "json")
        write_diagnostics_json(os, d);
      else
        write_diagnostics_csv(os, d);
    });
  }
  return 0;
}

struct CorrEstimateArgs {
  std::string input;
  std::optional<double> rho;
  CommonOut out;
};

int run_estimate_corr(const CorrEstimateArgs& a) {
  const auto studies = parse_continuous_csv_file(a.input);
  const HierEstimates est = estimate_hier(studies);
  std::vector<std::int64_t> sizes;
  sizes.reserve(studies.size());
  for (const auto& s : studies) sizes.push_back(s.n);
  const double rho_used = a.rho ? *a.rho : est.rho_star;
  const CorrelationResult corr = rho_x(est, sizes, rho_used);
  emit(a.out.out, [&](std::ostream& os) {
    if (a.out.format == "json")
      write_correlation_json(os, est, corr, rho_used);
    else
      write_correlation_csv(os, est, corr, rho_used);
  });
  return 0;
}

struct CorrSimArgs {
  std::string method;
  int setting = 1;
  GaussSimSettings set;
  int workers = 1;
  CommonOut out;
};

int run_simulate_corr(CorrSimArgs& a, bool rho_star_given) {
  if (!rho_star_given) {
    const double by_setting[] = {0.85, 0.65, 0.45, 0.25};
    a.set.rho_star = by_setting[a.setting - 1];
  }
  a.set.validate();
  const GaussSimResult res = a.method == "formula"
                                 ? simulate_formula_based(a.set, resolve_workers(a.workers))
                                 : simulate_two_step(a.set, resolve_workers(a.workers));
  emit(a.out.out, [&](std::ostream& os) {
    if (a.out.format == "json")
      write_gauss_sim_json(os, a.set, res, a.method);
    else
      write_gauss_sim_csv(os, res);
  });
  return 0;
}

struct RelationArgs {
  double rho_gen = 0.0;
  std::int64_t groups = 10;
  std::int64_t group_size = 100;
  std::int64_t repeats = 4;
  double mu1 = 0.0, mu2 = 0.0;
  double phi1 = 1.0, phi2 = 1.0;
  std::uint64_t seed = 0;
  CommonOut out;
};

int run_relation(const RelationArgs& a) {
  if (a.groups < 1) throw std::invalid_argument("--groups must be >= 1");
  const std::vector<GroupSpread> spreads(static_cast<std::size_t>(a.groups),
                                         GroupSpread{a.phi1, a.phi2});
  const std::vector<std::int64_t> sizes(static_cast<std::size_t>(a.groups), a.group_size);
  const RelationResult res =
      rho_relation_experiment(a.mu1, a.mu2, spreads, a.rho_gen, sizes, a.repeats, a.seed);
  emit(a.out.out, [&](std::ostream& os) {
    if (a.out.format == "json")
      write_relation_json(os, res);
    else
      write_relation_csv(os, res);
  });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"joint-distribution estimation from marginal summary data"};
  app.require_subcommand(1);

  BinaryEstimateArgs eb;
  CLI::App* est_bin = app.add_subcommand(
      "estimate-binary", "estimate (p1, p2, p11) from study summaries");
  est_bin->add_option("--input", eb.input, "CSV with columns n,x,y (bundled fixture when omitted)");
  est_bin->add_option("--alpha", eb.alpha, "CI miss probability");
  est_bin->add_flag("--legacy-999", eb.legacy_999, "render missing SEs as 999");
  add_output_flags(est_bin, eb.out);

  BinarySimArgs sb;
  CLI::App* sim_bin = app.add_subcommand(
      "simulate-binary", "coverage study for the binary joint estimator");
  sim_bin->add_option("--preset", sb.preset, "scenario preset")
      ->check(CLI::IsMember({"weak-small", "weak-large", "strong-small", "strong-large"}));
  sim_bin->add_option("--p1", sb.p1, "first margin");
  sim_bin->add_option("--p2", sb.p2, "second margin");
  sim_bin->add_option("--p11", sb.p11, "joint probability");
  sim_bin->add_option("--k", sb.k, "studies per replication");
  sim_bin->add_option("--n-min", sb.n_min, "smallest study size");
  sim_bin->add_option("--n-max", sb.n_max, "largest study size");
  sim_bin->add_option("--reps", sb.reps, "replications");
  sim_bin->add_option("--seed", sb.seed, "seed");
  sim_bin->add_option("--alpha", sb.alpha, "CI miss probability");
  sim_bin->add_option("--workers", sb.workers, "worker threads");
  sim_bin->add_option("--extreme-inflate", sb.extreme_inflate,
                      "multiply the first study's size by this factor");
  sim_bin->add_flag("--legacy-999", sb.legacy_999, "render missing SEs as 999");
  sim_bin->add_option("--diagnostics-out", sb.diagnostics_out,
                      "also write histogram/QQ data to this file");
  sim_bin->add_option("--bins", sb.bins, "histogram bins for --diagnostics-out");
  add_output_flags(sim_bin, sb.out);

  CorrEstimateArgs ec;
  CLI::App* est_corr = app.add_subcommand(
      "estimate-corr", "pooled correlation from continuous study summaries");
  est_corr->add_option("--input", ec.input, "CSV with columns n,m1,m2,s1,s2")->required();
  est_corr->add_option("--rho", ec.rho,
                       "within-study error correlation (estimated rho* when omitted)");
  add_output_flags(est_corr, ec.out);

  CorrSimArgs sc;
  CLI::App* sim_corr = app.add_subcommand(
      "simulate-corr", "repeat the pooled-correlation experiment");
  sim_corr->add_option("--method", sc.method, "estimation route")
      ->check(CLI::IsMember({"formula", "two-step"}))
      ->required();
  sim_corr->add_option("--setting", sc.setting, "preset 1..4 (selects rho*)")
      ->check(CLI::Range(1, 4));
  CLI::Option* rho_star_opt =
      sim_corr->add_option("--rho-star", sc.set.rho_star, "between-study correlation");
  sim_corr->add_option("--theta1", sc.set.theta1, "grand mean, first endpoint");
  sim_corr->add_option("--theta2", sc.set.theta2, "grand mean, second endpoint");
  sim_corr->add_option("--psi1", sc.set.psi1, "between-study sd, first endpoint");
  sim_corr->add_option("--psi2", sc.set.psi2, "between-study sd, second endpoint");
  sim_corr->add_option("--ig-shape1", sc.set.ig_shape1, "error-variance shape, first endpoint");
  sim_corr->add_option("--ig-rate1", sc.set.ig_rate1, "error-variance rate, first endpoint");
  sim_corr->add_option("--ig-shape2", sc.set.ig_shape2, "error-variance shape, second endpoint");
  sim_corr->add_option("--ig-rate2", sc.set.ig_rate2, "error-variance rate, second endpoint");
  sim_corr->add_option("--groups", sc.set.groups, "study count per replication");
  sim_corr->add_option("--group-size", sc.set.group_size, "patients per study");
  sim_corr->add_option("--reps", sc.set.reps, "replications");
  sim_corr->add_option("--seed", sc.set.seed, "seed");
  sim_corr->add_option("--workers", sc.workers, "worker threads");
  add_output_flags(sim_corr, sc.out);

  RelationArgs rel;
  CLI::App* relation = app.add_subcommand(
      "relation", "per-group sample correlations at a shared generating correlation");
  relation->add_option("--rho-gen", rel.rho_gen, "generating correlation")->required();
  relation->add_option("--groups", rel.groups, "group count");
  relation->add_option("--group-size", rel.group_size, "patients per group");
  relation->add_option("--repeats", rel.repeats, "independent repeats");
  relation->add_option("--mu1", rel.mu1, "mean, first variable");
  relation->add_option("--mu2", rel.mu2, "mean, second variable");
  relation->add_option("--phi1", rel.phi1, "sd, first variable");
  relation->add_option("--phi2", rel.phi2, "sd, second variable");
  relation->add_option("--seed", rel.seed, "seed");
  add_output_flags(relation, rel.out);

  std::optional<std::string> fixture_out;
  CLI::App* fixture = app.add_subcommand("fixture", "print the bundled clinical dataset");
  fixture->add_option("--out", fixture_out, "output file (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "margjoint: usage: " << e.what() << '\n';
    return 2;
  }

  try {
    if (app.got_subcommand(est_bin)) return run_estimate_binary(eb);
    if (app.got_subcommand(sim_bin)) return run_simulate_binary(sb);
    if (app.got_subcommand(est_corr)) return run_estimate_corr(ec);
    if (app.got_subcommand(sim_corr)) return run_simulate_corr(sc, rho_star_opt->count() > 0);
    if (app.got_subcommand(relation)) return run_relation(rel);
    if (app.got_subcommand(fixture)) {
      emit(fixture_out, [](std::ostream& os) { write_fixture_csv(os); });
      return 0;
    }
    std::cerr << "margjoint: usage: no subcommand\n";
    return 2;
  } catch (const ConvergenceError& e) {
    std::cerr << "margjoint: numerical: " << e.what() << '\n';
    return 3;
  } catch (const IoError& e) {
    std::cerr << "margjoint: io: " << e.what() << '\n';
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "margjoint: validation: " << e.what() << '\n';
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "margjoint: validation: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "margjoint: error: " << e.what() << '\n';
    return 1;
  }
}
