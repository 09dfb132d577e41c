#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "binary_estimate.hpp"
#include "binary_sim.hpp"
#include "errors.hpp"
#include "fixture.hpp"
#include "gauss_corr.hpp"

namespace margjoint {

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

inline std::int64_t parse_int(std::string_view field, std::size_t line_no, const char* col) {
  std::int64_t v = 0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
    throw std::invalid_argument("line " + std::to_string(line_no) + ": column " + col +
                                " is not an integer");
  return v;
}

inline double parse_real(std::string_view field, std::size_t line_no, const char* col) {
  double v = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
    throw std::invalid_argument("line " + std::to_string(line_no) + ": column " + col +
                                " is not a number");
  return v;
}

// column indices by header name; -1 when absent
inline std::ptrdiff_t find_column(const std::vector<std::string_view>& header,
                                  std::string_view name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<std::ptrdiff_t>(i);
  return -1;
}

inline std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace detail

inline SummaryCollection parse_binary_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::ptrdiff_t cn = -1, cx = -1, cy = -1;
  std::vector<MarginalSummary> records;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_fields(line);
    if (cn < 0) {
      cn = detail::find_column(fields, "n");
      cx = detail::find_column(fields, "x");
      cy = detail::find_column(fields, "y");
      if (cn < 0 || cx < 0 || cy < 0)
        throw std::invalid_argument("header must contain columns n,x,y");
      continue;
    }
    const auto need = static_cast<std::size_t>(std::max({cn, cx, cy}));
    if (fields.size() <= need)
      throw std::invalid_argument("line " + std::to_string(line_no) + ": too few fields");
    try {
      records.emplace_back(detail::parse_int(fields[static_cast<std::size_t>(cn)], line_no, "n"),
                           detail::parse_int(fields[static_cast<std::size_t>(cx)], line_no, "x"),
                           detail::parse_int(fields[static_cast<std::size_t>(cy)], line_no, "y"));
    } catch (const std::invalid_argument& e) {
      std::string msg = e.what();
      if (msg.rfind("line ", 0) == 0) throw;
      throw std::invalid_argument("line " + std::to_string(line_no) + ": " + msg);
    }
  }
  if (cn < 0) throw std::invalid_argument("header must contain columns n,x,y");
  if (records.empty()) throw std::invalid_argument("no data rows");
  return SummaryCollection(std::move(records));
}

inline std::vector<ContinuousStudySummary> parse_continuous_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::ptrdiff_t cn = -1, cm1 = -1, cm2 = -1, cs1 = -1, cs2 = -1;
  std::vector<ContinuousStudySummary> studies;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_fields(line);
    if (cn < 0) {
      cn = detail::find_column(fields, "n");
      cm1 = detail::find_column(fields, "m1");
      cm2 = detail::find_column(fields, "m2");
      cs1 = detail::find_column(fields, "s1");
      cs2 = detail::find_column(fields, "s2");
      if (cn < 0 || cm1 < 0 || cm2 < 0 || cs1 < 0 || cs2 < 0)
        throw std::invalid_argument("header must contain columns n,m1,m2,s1,s2");
      continue;
    }
    const auto need = static_cast<std::size_t>(std::max({cn, cm1, cm2, cs1, cs2}));
    if (fields.size() <= need)
      throw std::invalid_argument("line " + std::to_string(line_no) + ": too few fields");
    try {
      studies.emplace_back(
          detail::parse_int(fields[static_cast<std::size_t>(cn)], line_no, "n"),
          detail::parse_real(fields[static_cast<std::size_t>(cm1)], line_no, "m1"),
          detail::parse_real(fields[static_cast<std::size_t>(cm2)], line_no, "m2"),
          detail::parse_real(fields[static_cast<std::size_t>(cs1)], line_no, "s1"),
          detail::parse_real(fields[static_cast<std::size_t>(cs2)], line_no, "s2"));
    } catch (const std::invalid_argument& e) {
      std::string msg = e.what();
      if (msg.rfind("line ", 0) == 0) throw;
      throw std::invalid_argument("line " + std::to_string(line_no) + ": " + msg);
    }
  }
  if (cn < 0) throw std::invalid_argument("header must contain columns n,m1,m2,s1,s2");
  if (studies.empty()) throw std::invalid_argument("no data rows");
  return studies;
}

inline SummaryCollection parse_binary_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  try {
    return parse_binary_csv(in);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

inline std::vector<ContinuousStudySummary> parse_continuous_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  try {
    return parse_continuous_csv(in);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

// Minimal JSON writer with deterministic output: keys in call order, reals
// rendered with 12 significant digits.
class JsonWriter {
 public:
  explicit JsonWriter(std::ostream& os) : os_(os) {}

  void begin_object() { sep(); os_ << '{'; fresh_.push_back(true); }
  void end_object() { os_ << '}'; fresh_.pop_back(); }
  void begin_array() { sep(); os_ << '['; fresh_.push_back(true); }
  void end_array() { os_ << ']'; fresh_.pop_back(); }

  void key(std::string_view k) {
    sep();
    write_string(k);
    os_ << ':';
    fresh_.back() = true;
  }

  void value(double v) {
    sep();
    if (std::isfinite(v)) os_ << detail::format_real(v); else os_ << "null";
  }
  void value(std::int64_t v) { sep(); os_ << v; }
  void value(std::uint64_t v) { sep(); os_ << v; }
  void value(bool v) { sep(); os_ << (v ? "true" : "false"); }
  void value(std::string_view s) { sep(); write_string(s); }
  void null() { sep(); os_ << "null"; }

 private:
  void sep() {
    if (fresh_.empty()) return;
    if (fresh_.back()) fresh_.back() = false; else os_ << ',';
  }

  void write_string(std::string_view s) {
    os_ << '"';
    for (char c : s) {
      if (c == '"' || c == '\\') os_ << '\\' << c;
      else if (static_cast<unsigned char>(c) < 0x20) {
        char buf[8];
        std::snprintf(buf, sizeof buf, "\\u%04x", c);
        os_ << buf;
      } else os_ << c;
    }
    os_ << '"';
  }

  std::ostream& os_;
  std::vector<bool> fresh_;
};

namespace detail {

inline void json_interval(JsonWriter& w, const IntervalEstimate& ci) {
  w.begin_object();
  w.key("lower"); w.value(ci.lower);
  w.key("upper"); w.value(ci.upper);
  w.key("method");
  w.value(ci.method == IntervalMethod::normal ? std::string_view("normal")
                                              : std::string_view("likelihood_ratio"));
  w.key("clipped_low"); w.value(ci.clipped_low);
  w.key("clipped_high"); w.value(ci.clipped_high);
  w.end_object();
}

inline void json_se(JsonWriter& w, const std::optional<double>& se, bool legacy_999) {
  if (se) w.value(*se);
  else if (legacy_999) w.value(999.0);
  else w.null();
}

inline void json_point(JsonWriter& w, const PointEstimate& pe, bool legacy_999) {
  w.begin_object();
  w.key("value"); w.value(pe.value);
  w.key("se"); json_se(w, pe.se, legacy_999);
  w.key("boundary"); w.value(pe.boundary);
  w.end_object();
}

inline std::string csv_se(const std::optional<double>& se, bool legacy_999) {
  if (se) return format_real(*se);
  return legacy_999 ? "999" : "";
}

}  // namespace detail

inline void write_estimate_report_json(std::ostream& os, const EstimateReport& rep,
                                       bool legacy_999 = false) {
  JsonWriter w(os);
  w.begin_object();
  w.key("schema"); w.value(std::int64_t{1});
  w.key("p1"); detail::json_point(w, rep.p1, legacy_999);
  w.key("p2"); detail::json_point(w, rep.p2, legacy_999);
  w.key("p11"); detail::json_point(w, rep.p11, legacy_999);
  w.key("phi"); w.value(rep.phi);
  w.key("loglik_at_mle"); w.value(rep.loglik_at_mle);
  w.key("grid_argmax"); w.value(rep.grid_argmax);
  w.key("optimizer_iterations"); w.value(rep.optimizer_iterations);
  w.key("ci1_p1"); detail::json_interval(w, rep.ci1_p1);
  w.key("ci1_p2"); detail::json_interval(w, rep.ci1_p2);
  w.key("ci1_p11");
  if (rep.ci1_p11) detail::json_interval(w, *rep.ci1_p11); else w.null();
  w.key("ci2_p1"); detail::json_interval(w, rep.ci2_p1);
  w.key("ci2_p2"); detail::json_interval(w, rep.ci2_p2);
  w.key("ci2_p11"); detail::json_interval(w, rep.ci2_p11);
  w.end_object();
  os << '\n';
}

inline void write_estimate_report_csv(std::ostream& os, const EstimateReport& rep,
                                      bool legacy_999 = false) {
  os << "quantity,value,se,boundary,ci1_low,ci1_high,ci1_clipped_low,ci1_clipped_high,"
        "ci2_low,ci2_high,ci2_clipped_low,ci2_clipped_high\n";
  auto interval_cols = [&](const IntervalEstimate* ci) {
    if (!ci) {
      os << ",,,,";
      return;
    }
    os << detail::format_real(ci->lower) << ',' << detail::format_real(ci->upper) << ','
       << (ci->clipped_low ? 1 : 0) << ',' << (ci->clipped_high ? 1 : 0);
  };
  auto param_row = [&](const char* name, const PointEstimate& pe, const IntervalEstimate* ci1,
                       const IntervalEstimate* ci2) {
    os << name << ',' << detail::format_real(pe.value) << ','
       << detail::csv_se(pe.se, legacy_999) << ',' << (pe.boundary ? 1 : 0) << ',';
    interval_cols(ci1);
    os << ',';
    interval_cols(ci2);
    os << '\n';
  };
  param_row("p1", rep.p1, &rep.ci1_p1, &rep.ci2_p1);
  param_row("p2", rep.p2, &rep.ci1_p2, &rep.ci2_p2);
  param_row("p11", rep.p11, rep.ci1_p11 ? &*rep.ci1_p11 : nullptr, &rep.ci2_p11);
  os << "phi," << detail::format_real(rep.phi) << ",,,,,,,,,,\n";
  os << "loglik_at_mle," << detail::format_real(rep.loglik_at_mle) << ",,,,,,,,,,\n";
  os << "grid_argmax," << detail::format_real(rep.grid_argmax) << ",,,,,,,,,,\n";
  os << "optimizer_iterations," << rep.optimizer_iterations << ",,,,,,,,,,\n";
}

namespace detail {

inline void json_scenario(JsonWriter& w, const Scenario& sc) {
  w.begin_object();
  w.key("p1"); w.value(sc.truth.p1);
  w.key("p2"); w.value(sc.truth.p2);
  w.key("p11"); w.value(sc.truth.p11);
  w.key("k"); w.value(sc.k);
  w.key("n_min"); w.value(sc.n_min);
  w.key("n_max"); w.value(sc.n_max);
  w.key("reps"); w.value(sc.reps);
  w.key("seed"); w.value(static_cast<std::uint64_t>(sc.seed));
  w.key("extreme_inflate");
  if (sc.extreme_inflate) w.value(*sc.extreme_inflate); else w.null();
  w.end_object();
}

inline void json_nullable(JsonWriter& w, double v) {
  if (std::isnan(v)) w.null(); else w.value(v);
}

}  // namespace detail

inline void write_scenario_result_json(std::ostream& os, const ScenarioResult& res,
                                       bool legacy_999 = false) {
  JsonWriter w(os);
  w.begin_object();
  w.key("schema"); w.value(std::int64_t{1});
  w.key("scenario"); detail::json_scenario(w, res.scenario);
  w.key("summary");
  w.begin_object();
  const ScenarioSummary& s = res.summary;
  w.key("reps_total"); w.value(s.reps_total);
  w.key("failures"); w.value(s.failures);
  w.key("se_unavailable"); w.value(s.se_unavailable);
  w.key("boundary_count"); w.value(s.boundary_count);
  w.key("mean_estimate"); detail::json_nullable(w, s.mean_estimate);
  w.key("median_estimate"); detail::json_nullable(w, s.median_estimate);
  w.key("sd_estimate"); detail::json_nullable(w, s.sd_estimate);
  w.key("mean_bias"); detail::json_nullable(w, s.mean_bias);
  w.key("mean_se"); detail::json_nullable(w, s.mean_se);
  w.key("se_bias"); detail::json_nullable(w, s.se_bias);
  w.key("ci1_coverage"); detail::json_nullable(w, s.ci1_coverage);
  w.key("ci1_mean_width"); detail::json_nullable(w, s.ci1_mean_width);
  w.key("ci2_coverage"); detail::json_nullable(w, s.ci2_coverage);
  w.key("ci2_mean_width"); detail::json_nullable(w, s.ci2_mean_width);
  w.key("ci1_clipped"); w.value(s.ci1_clipped);
  w.key("ci2_clipped"); w.value(s.ci2_clipped);
  w.end_object();
  w.key("reps");
  w.begin_array();
  for (std::size_t i = 0; i < res.reps.size(); ++i) {
    const RepRecord& r = res.reps[i];
    w.begin_object();
    w.key("rep"); w.value(static_cast<std::int64_t>(i));
    w.key("failed"); w.value(r.failed);
    w.key("estimate"); detail::json_nullable(w, r.estimate);
    w.key("se"); detail::json_se(w, r.se, legacy_999);
    w.key("boundary"); w.value(r.boundary);
    w.key("ci1");
    if (r.ci1) detail::json_interval(w, *r.ci1); else w.null();
    w.key("ci2");
    if (r.ci2) detail::json_interval(w, *r.ci2); else w.null();
    w.end_object();
  }
  w.end_array();
  w.end_object();
  os << '\n';
}

inline void write_scenario_result_csv(std::ostream& os, const ScenarioResult& res,
                                      bool legacy_999 = false) {
  os << "rep,estimate,se,ci1_low,ci1_high,ci2_low,ci2_high,cover1,cover2\n";
  const double truth = res.scenario.truth.p11;
  for (std::size_t i = 0; i < res.reps.size(); ++i) {
    const RepRecord& r = res.reps[i];
    os << i << ',';
    if (!r.failed) os << detail::format_real(r.estimate);
    os << ',' << detail::csv_se(r.se, legacy_999) << ',';
    if (r.ci1)
      os << detail::format_real(r.ci1->lower) << ',' << detail::format_real(r.ci1->upper);
    else
      os << ',';
    os << ',';
    if (r.ci2)
      os << detail::format_real(r.ci2->lower) << ',' << detail::format_real(r.ci2->upper);
    else
      os << ',';
    os << ',';
    if (r.ci1) os << (r.ci1->contains(truth) ? 1 : 0);
    os << ',';
    if (r.ci2) os << (r.ci2->contains(truth) ? 1 : 0);
    os << '\n';
  }
}

inline void write_diagnostics_json(std::ostream& os, const DiagnosticsBundle& d) {
  JsonWriter w(os);
  w.begin_object();
  w.key("schema"); w.value(std::int64_t{1});
  w.key("mean"); w.value(d.mean);
  w.key("sd"); w.value(d.sd);
  w.key("histogram");
  w.begin_object();
  w.key("edges");
  w.begin_array();
  for (double e : d.bin_edges) w.value(e);
  w.end_array();
  w.key("counts");
  w.begin_array();
  for (std::int64_t c : d.bin_counts) w.value(c);
  w.end_array();
  w.end_object();
  w.key("qq");
  w.begin_object();
  w.key("theoretical");
  w.begin_array();
  for (double q : d.qq_theoretical) w.value(q);
  w.end_array();
  w.key("sample");
  w.begin_array();
  for (double q : d.qq_sample) w.value(q);
  w.end_array();
  w.end_object();
  w.end_object();
  os << '\n';
}

inline void write_diagnostics_csv(std::ostream& os, const DiagnosticsBundle& d) {
  os << "kind,index,a,b\n";
  os << "mean,0," << detail::format_real(d.mean) << ",\n";
  os << "sd,0," << detail::format_real(d.sd) << ",\n";
  for (std::size_t i = 0; i < d.bin_counts.size(); ++i)
    os << "bin," << i << ',' << detail::format_real(d.bin_edges[i]) << ',' << d.bin_counts[i]
       << '\n';
  os << "edge_high," << d.bin_counts.size() << ','
     << detail::format_real(d.bin_edges.back()) << ",\n";
  for (std::size_t i = 0; i < d.qq_theoretical.size(); ++i)
    os << "qq," << i << ',' << detail::format_real(d.qq_theoretical[i]) << ','
       << detail::format_real(d.qq_sample[i]) << '\n';
}

inline void write_correlation_json(std::ostream& os, const HierEstimates& est,
                                   const CorrelationResult& corr, double rho_used) {
  JsonWriter w(os);
  w.begin_object();
  w.key("schema"); w.value(std::int64_t{1});
  w.key("theta1"); w.value(est.theta1);
  w.key("theta2"); w.value(est.theta2);
  w.key("psi1"); w.value(est.psi1);
  w.key("psi2"); w.value(est.psi2);
  w.key("rho_star"); w.value(est.rho_star);
  w.key("sigma1_sq");
  w.begin_array();
  for (double v : est.sigma1_sq) w.value(v);
  w.end_array();
  w.key("sigma2_sq");
  w.begin_array();
  for (double v : est.sigma2_sq) w.value(v);
  w.end_array();
  w.key("rho_used"); w.value(rho_used);
  w.key("var1"); w.value(corr.var1);
  w.key("var2"); w.value(corr.var2);
  w.key("cov"); w.value(corr.cov);
  w.key("a");
  if (corr.a) w.value(*corr.a); else w.null();
  w.key("A");
  if (corr.A) w.value(*corr.A); else w.null();
  w.key("rho_x"); w.value(corr.rho_x);
  w.end_object();
  os << '\n';
}

inline void write_correlation_csv(std::ostream& os, const HierEstimates& est,
                                  const CorrelationResult& corr, double rho_used) {
  os << "quantity,index,value\n";
  os << "theta1,," << detail::format_real(est.theta1) << '\n';
  os << "theta2,," << detail::format_real(est.theta2) << '\n';
  os << "psi1,," << detail::format_real(est.psi1) << '\n';
  os << "psi2,," << detail::format_real(est.psi2) << '\n';
  os << "rho_star,," << detail::format_real(est.rho_star) << '\n';
  for (std::size_t j = 0; j < est.sigma1_sq.size(); ++j)
    os << "sigma1_sq," << j << ',' << detail::format_real(est.sigma1_sq[j]) << '\n';
  for (std::size_t j = 0; j < est.sigma2_sq.size(); ++j)
    os << "sigma2_sq," << j << ',' << detail::format_real(est.sigma2_sq[j]) << '\n';
  os << "rho_used,," << detail::format_real(rho_used) << '\n';
  os << "var1,," << detail::format_real(corr.var1) << '\n';
  os << "var2,," << detail::format_real(corr.var2) << '\n';
  os << "cov,," << detail::format_real(corr.cov) << '\n';
  os << "a,," << (corr.a ? detail::format_real(*corr.a) : "") << '\n';
  os << "A,," << (corr.A ? detail::format_real(*corr.A) : "") << '\n';
  os << "rho_x,," << detail::format_real(corr.rho_x) << '\n';
}

inline void write_gauss_sim_json(std::ostream& os, const GaussSimSettings& set,
                                 const GaussSimResult& res, std::string_view method) {
  JsonWriter w(os);
  w.begin_object();
  w.key("schema"); w.value(std::int64_t{1});
  w.key("method"); w.value(method);
  w.key("settings");
  w.begin_object();
  w.key("theta1"); w.value(set.theta1);
  w.key("theta2"); w.value(set.theta2);
  w.key("psi1"); w.value(set.psi1);
  w.key("psi2"); w.value(set.psi2);
  w.key("rho_star"); w.value(set.rho_star);
  w.key("ig_shape1"); w.value(set.ig_shape1);
  w.key("ig_rate1"); w.value(set.ig_rate1);
  w.key("ig_shape2"); w.value(set.ig_shape2);
  w.key("ig_rate2"); w.value(set.ig_rate2);
  w.key("groups"); w.value(set.groups);
  w.key("group_size"); w.value(set.group_size);
  w.key("reps"); w.value(set.reps);
  w.key("seed"); w.value(static_cast<std::uint64_t>(set.seed));
  w.end_object();
  w.key("mean"); detail::json_nullable(w, res.mean);
  w.key("sd"); detail::json_nullable(w, res.sd);
  w.key("failures"); w.value(res.failures);
  w.key("estimates");
  w.begin_array();
  for (double v : res.estimates) detail::json_nullable(w, v);
  w.end_array();
  w.end_object();
  os << '\n';
}

inline void write_gauss_sim_csv(std::ostream& os, const GaussSimResult& res) {
  os << "rep,estimate\n";
  for (std::size_t i = 0; i < res.estimates.size(); ++i) {
    os << i << ',';
    if (!std::isnan(res.estimates[i])) os << detail::format_real(res.estimates[i]);
    os << '\n';
  }
}

inline void write_relation_json(std::ostream& os, const RelationResult& res) {
  JsonWriter w(os);
  w.begin_object();
  w.key("schema"); w.value(std::int64_t{1});
  w.key("rho_gen"); w.value(res.rho_gen);
  w.key("rho_hat");
  w.begin_array();
  for (const auto& row : res.rho_hat) {
    w.begin_array();
    for (double v : row) w.value(v);
    w.end_array();
  }
  w.end_array();
  w.end_object();
  os << '\n';
}

inline void write_relation_csv(std::ostream& os, const RelationResult& res) {
  os << "repeat,group,rho_gen,rho_hat\n";
  for (std::size_t t = 0; t < res.rho_hat.size(); ++t)
    for (std::size_t j = 0; j < res.rho_hat[t].size(); ++j)
      os << t << ',' << j << ',' << detail::format_real(res.rho_gen) << ','
         << detail::format_real(res.rho_hat[t][j]) << '\n';
}

inline void write_fixture_csv(std::ostream& os) {
  os << "id,study,region,n,x,y\n";
  for (const FixtureRow& r : kClinicalRows)
    os << r.registry_id << ',' << r.disease << ',' << r.region << ',' << r.n << ',' << r.x << ','
       << r.y << '\n';
}

// Opens path for writing, hands the stream to fn, and surfaces stream
// failures with the path attached.
inline void write_file(const std::string& path, const std::function<void(std::ostream&)>& fn) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  fn(out);
  out.flush();
  if (!out.good()) throw IoError("write failed for " + path);
}

}  // namespace margjoint
