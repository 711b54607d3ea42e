#include "csip/report.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace csip {

using nlohmann::json;

AnalysisReport analyze_series(const SeedDeltaSeries& series,
                              const DecisionRule& rule) {
  AnalysisReport r;
  r.series = series;
  r.rule = rule;
  r.estimate = interval_estimate(series.deltas(), rule.bootstrap());
  r.verdict = decide(r.estimate.mean, r.estimate.boot_lo, r.estimate.t_lo,
                     rule.mean_pp, rule.strength_pp);
  return r;
}

AnalysisReport analyze_files(const std::vector<PredictionFile>& method,
                             const std::vector<PredictionFile>& baseline,
                             const DecisionRule& rule) {
  AnalysisReport r = analyze_series(per_seed_deltas(method, baseline), rule);
  if (!method.empty()) r.method_cell = method.front().cell;
  if (!baseline.empty()) r.baseline_cell = baseline.front().cell;
  return r;
}

std::string report_to_json(const AnalysisReport& report) {
  json j;
  j["method_cell"] = report.method_cell;
  j["baseline_cell"] = report.baseline_cell;
  j["rule"] = {{"mean_pp", report.rule.mean_pp},
               {"strength_pp", report.rule.strength_pp},
               {"bootstrap_rounds", report.rule.bootstrap_rounds},
               {"bootstrap_seed", report.rule.bootstrap_seed},
               {"level", report.rule.level}};
  j["estimate"] = {{"mean", report.estimate.mean},
                   {"sd", report.estimate.sd},
                   {"boot_lo", report.estimate.boot_lo},
                   {"boot_hi", report.estimate.boot_hi},
                   {"t_lo", report.estimate.t_lo},
                   {"t_hi", report.estimate.t_hi},
                   {"n", report.estimate.n}};
  j["verdict"] = {{"c1_pass", report.verdict.c1_pass},
                  {"c1_prime", report.verdict.c1_prime},
                  {"mean", report.verdict.mean},
                  {"boot_lo", report.verdict.boot_lo},
                  {"t_lo", report.verdict.t_lo}};
  j["per_seed"] = json::array();
  for (const auto& row : report.series.rows)
    j["per_seed"].push_back({{"seed", row.seed},
                             {"method_f1", row.method_f1},
                             {"baseline_f1", row.baseline_f1},
                             {"delta", row.delta}});
  return j.dump(2);
}

namespace {
std::string fmt(double v, int decimals = 3) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%+.*f", decimals, v);
  return buf;
}
}  // namespace

std::string report_to_text(const AnalysisReport& report) {
  std::ostringstream out;
  out << "cell " << report.method_cell << " vs " << report.baseline_cell << ", N="
      << report.estimate.n << "\n";
  out << "per-seed deltas (pp):\n";
  for (const auto& row : report.series.rows) {
    char line[128];
    std::snprintf(line, sizeof(line), "  seed %6llu  method %7.2f  baseline %7.2f  delta %+6.2f\n",
                  static_cast<unsigned long long>(row.seed), row.method_f1,
                  row.baseline_f1, row.delta);
    out << line;
  }
  out << "mean " << fmt(report.estimate.mean) << " pp, sd "
      << fmt(report.estimate.sd).substr(1) << "\n";
  out << "seed-bootstrap " << static_cast<int>(report.rule.level * 100) << "% CI ["
      << fmt(report.estimate.boot_lo) << ", " << fmt(report.estimate.boot_hi)
      << "] (B=" << report.rule.bootstrap_rounds << ", rng "
      << report.rule.bootstrap_seed << ")\n";
  out << "student-t " << static_cast<int>(report.rule.level * 100) << "% CI ["
      << fmt(report.estimate.t_lo) << ", " << fmt(report.estimate.t_hi) << "] (df="
      << report.estimate.n - 1 << ")\n";
  out << "C1 (mean >= " << report.rule.mean_pp << " pp, both lower bounds > 0): "
      << (report.verdict.c1_pass ? "PASS" : "FAIL") << "\n";
  out << "C1' (mean >= " << report.rule.strength_pp << " pp): "
      << (report.verdict.c1_prime ? "PASS" : "---") << "\n";
  return out.str();
}

void write_analysis_report(const AnalysisReport& report,
                           const std::string& json_path,
                           const std::string& text_path) {
  if (!json_path.empty()) {
    std::ofstream out(json_path, std::ios::binary);
    if (!out) throw std::runtime_error("write_analysis_report: cannot write " + json_path);
    out << report_to_json(report) << '\n';
  }
  if (!text_path.empty()) {
    std::ofstream out(text_path, std::ios::binary);
    if (!out) throw std::runtime_error("write_analysis_report: cannot write " + text_path);
    out << report_to_text(report);
  }
}

}  // namespace csip
