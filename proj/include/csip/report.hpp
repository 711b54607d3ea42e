#pragma once

#include "csip/stats.hpp"

#include <string>
#include <vector>

namespace csip {

/// Full confirmatory analysis of one method-vs-baseline cell: per-seed
/// rows, both interval estimates, the locked-rule verdict and the exact
/// parameters used.
struct AnalysisReport {
  std::string method_cell;
  std::string baseline_cell;
  SeedDeltaSeries series;
  IntervalEstimate estimate;
  Verdict verdict;
  DecisionRule rule;
};

AnalysisReport analyze_files(const std::vector<PredictionFile>& method,
                             const std::vector<PredictionFile>& baseline,
                             const DecisionRule& rule);

AnalysisReport analyze_series(const SeedDeltaSeries& series,
                              const DecisionRule& rule);

std::string report_to_json(const AnalysisReport& report);
std::string report_to_text(const AnalysisReport& report);

void write_analysis_report(const AnalysisReport& report,
                           const std::string& json_path,
                           const std::string& text_path);

}  // namespace csip
