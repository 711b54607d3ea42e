#pragma once

#include "csip/predfile.hpp"
#include "csip/stats.hpp"

#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace csip {

enum class FailureKind { kInfra, kTraining };

/// Infrastructure failures match a fixed, metric-free pattern set
/// (out-of-memory, device error, host disconnect); everything else is a
/// training failure. The patterns contain no digits, so no metric string
/// can match.
FailureKind classify_failure(std::string_view log_text);

/// Replaces metric values (name=value forms, percentages, pp-suffixed
/// numbers) with [REDACTED] while preserving all other content. Every
/// byte on the operator-visible stream passes through this filter.
std::string redact_metrics(std::string_view line);

struct StageSpec {
  std::string name;
  std::string backbone;               // encoder config name for this stage
  EncoderConfig encoder;
  std::vector<std::string> cells;     // subset of {"c2", "v1", "v2"}
  std::string gate_cell = "v2";       // method cell evaluated by the rule
  std::string baseline_cell = "c2";
  std::optional<std::string> gated_on;  // launch iff that stage's verdict passed
};

/// Immutable once a run starts: N is fixed at plan creation and the seed
/// lists cannot be extended.
struct CampaignPlan {
  std::string name;
  std::string data_dir;    // train.jsonl / val.jsonl / test.jsonl
  std::string output_root;
  std::vector<std::uint64_t> primary_seeds;
  std::vector<std::uint64_t> backup_seeds;
  DecisionRule rule;
  Hyperparameters hp;
  std::vector<StageSpec> stages;
};

CampaignPlan load_plan(const std::string& path);
void save_plan(const CampaignPlan& plan, const std::string& path);

struct RunOutcome {
  bool success = false;
  std::string log_text;  // sealed; only a redacted copy is shown live
};

/// Runs one (stage, cell, seed) and, on success, writes the prediction
/// file to out_path. Injectable so the state machine is testable with
/// simulated faults.
using Executor = std::function<RunOutcome(const StageSpec&, const std::string& cell,
                                          std::uint64_t seed,
                                          const std::string& out_path)>;

/// Evaluates the locked rule on a stage's gate cell; injectable so gate
/// purity can be instrumented.
using Analyzer = std::function<Verdict(const std::vector<PredictionFile>& method,
                                       const std::vector<PredictionFile>& baseline,
                                       const DecisionRule& rule)>;

enum class RunStatus { kPending, kRunning, kDone, kInfraRetrying, kSubstituted, kFailed };

struct RunState {
  RunStatus status = RunStatus::kPending;
  int attempts = 0;
  int infra_retries = 0;
  std::optional<std::uint64_t> substituted_with;
};

struct StageReport {
  std::string name;
  bool executed = false;
  bool gate_evaluated = false;
  std::optional<Verdict> verdict;
  std::map<std::string, std::vector<std::uint64_t>> completed_seeds;  // per cell
  std::vector<std::string> substitutions;  // "cell: old -> new"
};

struct CampaignResult {
  bool aborted = false;
  std::string abort_reason;
  bool family_closed = false;  // a failed primary gate closes the family
  std::vector<StageReport> stages;
  std::map<std::string, RunState> run_states;  // "stage/cell/seed"
  std::vector<std::string> raw_log_paths;
};

/// Append-only, replayable event record.
struct RunEvent {
  std::string timestamp;
  std::string kind;  // run-started, run-done, infra-retry, substituted,
                     // run-failed, stage-gate, campaign-abort
  std::string stage;
  std::string cell;
  std::uint64_t seed = 0;
  int attempt = 0;
  std::string detail;
};

std::string event_to_json(const RunEvent& e);
RunEvent event_from_json(const std::string& line);

/// Reconstructs the final per-run states from an event sequence.
std::map<std::string, RunState> replay_state(std::span<const RunEvent> events);

/// The pre-registered state machine. Stage A runs every cell over all N
/// primary seeds; the locked rule is evaluated exactly once per gated
/// stage; downstream stages launch iff their gate verdict passed. An
/// infrastructure failure retries the same seed up to twice and then
/// aborts the campaign; a training failure substitutes the next unused
/// backup seed. Metric-bearing run logs are sealed to per-run files
/// opened only after the campaign completes; the operator stream sees a
/// redacted copy.
CampaignResult run_campaign(const CampaignPlan& plan, const Executor& executor,
                            std::ostream& operator_log,
                            const Analyzer& analyzer = {});

/// Default analyzer: the stats pipeline under the locked rule.
Verdict analyze_with_rule(const std::vector<PredictionFile>& method,
                          const std::vector<PredictionFile>& baseline,
                          const DecisionRule& rule);

}  // namespace csip
