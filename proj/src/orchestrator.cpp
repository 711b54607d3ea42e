#include "csip/orchestrator.hpp"

#include <json.hpp>

#include <cctype>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <unordered_set>

namespace csip {

using nlohmann::json;
namespace fs = std::filesystem;

FailureKind classify_failure(std::string_view log_text) {
  // Fixed lowercase substrings; none contains a digit, so metric strings
  // can never match.
  static constexpr std::string_view kInfraPatterns[] = {
      "out of memory",   "outofmemory",        "oom-kill",
      "oom kill",        "memory exhausted",   "cuda error",
      "cuda failure",    "device error",       "device lost",
      "gpu error",       "host disconnect",    "disconnected from host",
      "connection lost", "host unreachable",
  };
  std::string lower(log_text);
  for (char& c : lower)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (std::string_view p : kInfraPatterns)
    if (lower.find(p) != std::string::npos) return FailureKind::kInfra;
  return FailureKind::kTraining;
}

std::string redact_metrics(std::string_view line) {
  static const std::regex name_value(
      R"(((?:macro|micro)[-_ ]?f1|\bm?f1\b|accuracy|\bacc\b|precision|recall|\bloss\b|\bauc\b|\bdelta\b|\bscore\b)(\s*[=:]\s*|\s+)([-+]?[0-9]+(?:\.[0-9]+)?(?:[eE][-+]?[0-9]+)?%?))",
      std::regex::icase);
  static const std::regex percentage(
      R"(([-+]?[0-9]+(?:\.[0-9]+)?)\s*(%|\bpp\b))", std::regex::icase);
  std::string out = std::regex_replace(std::string(line), name_value,
                                       "$1$2[REDACTED]");
  out = std::regex_replace(out, percentage, "[REDACTED]$2");
  return out;
}

// ---------------------------------------------------------------------------
// Plan IO
// ---------------------------------------------------------------------------

namespace {

json encoder_to_json(const EncoderConfig& cfg) {
  return {{"vocab", cfg.vocab},
          {"hidden", cfg.hidden},
          {"max_len", cfg.max_len},
          {"dropout", cfg.dropout},
          {"name", cfg.name}};
}

EncoderConfig encoder_from_json(const json& j) {
  EncoderConfig cfg;
  cfg.vocab = j.at("vocab").get<int>();
  cfg.hidden = j.at("hidden").get<int>();
  cfg.max_len = j.at("max_len").get<int>();
  cfg.dropout = j.at("dropout").get<double>();
  cfg.name = j.at("name").get<std::string>();
  return cfg;
}

json hp_to_json(const Hyperparameters& hp) {
  return {{"lr", hp.lr},
          {"weight_decay", hp.weight_decay},
          {"warmup_ratio", hp.warmup_ratio},
          {"clip_norm", hp.clip_norm},
          {"dropout", hp.dropout},
          {"lambda_select", hp.lambda_select},
          {"lambda_remain", hp.lambda_remain},
          {"stage1_epochs", hp.stage1_epochs},
          {"stage1_batch", hp.stage1_batch},
          {"stage2_epochs", hp.stage2_epochs},
          {"ft_batch", hp.ft_batch},
          {"replay_batch", hp.replay_batch}};
}

Hyperparameters hp_from_json(const json& j) {
  Hyperparameters hp;
  hp.lr = j.at("lr").get<double>();
  hp.weight_decay = j.at("weight_decay").get<double>();
  hp.warmup_ratio = j.at("warmup_ratio").get<double>();
  hp.clip_norm = j.at("clip_norm").get<double>();
  hp.dropout = j.at("dropout").get<double>();
  hp.lambda_select = j.at("lambda_select").get<double>();
  hp.lambda_remain = j.at("lambda_remain").get<double>();
  hp.stage1_epochs = j.at("stage1_epochs").get<int>();
  hp.stage1_batch = j.at("stage1_batch").get<int>();
  hp.stage2_epochs = j.at("stage2_epochs").get<int>();
  hp.ft_batch = j.at("ft_batch").get<int>();
  hp.replay_batch = j.at("replay_batch").get<int>();
  return hp;
}

}  // namespace

CampaignPlan load_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_plan: cannot open " + path);
  json j;
  in >> j;
  CampaignPlan plan;
  plan.name = j.at("name").get<std::string>();
  plan.data_dir = j.at("data_dir").get<std::string>();
  plan.output_root = j.at("output_root").get<std::string>();
  plan.primary_seeds = j.at("primary_seeds").get<std::vector<std::uint64_t>>();
  plan.backup_seeds = j.at("backup_seeds").get<std::vector<std::uint64_t>>();
  const auto& r = j.at("rule");
  plan.rule.mean_pp = r.at("mean_pp").get<double>();
  plan.rule.strength_pp = r.at("strength_pp").get<double>();
  plan.rule.bootstrap_rounds = r.at("bootstrap_rounds").get<long>();
  plan.rule.bootstrap_seed = r.at("bootstrap_seed").get<std::uint64_t>();
  plan.rule.level = r.at("level").get<double>();
  plan.hp = hp_from_json(j.at("hp"));
  for (const auto& s : j.at("stages")) {
    StageSpec st;
    st.name = s.at("name").get<std::string>();
    st.backbone = s.at("backbone").get<std::string>();
    st.encoder = encoder_from_json(s.at("encoder"));
    st.cells = s.at("cells").get<std::vector<std::string>>();
    st.gate_cell = s.value("gate_cell", std::string("v2"));
    st.baseline_cell = s.value("baseline_cell", std::string("c2"));
    if (s.contains("gated_on") && !s.at("gated_on").is_null())
      st.gated_on = s.at("gated_on").get<std::string>();
    plan.stages.push_back(std::move(st));
  }
  return plan;
}

void save_plan(const CampaignPlan& plan, const std::string& path) {
  json j;
  j["name"] = plan.name;
  j["data_dir"] = plan.data_dir;
  j["output_root"] = plan.output_root;
  j["primary_seeds"] = plan.primary_seeds;
  j["backup_seeds"] = plan.backup_seeds;
  j["rule"] = {{"mean_pp", plan.rule.mean_pp},
               {"strength_pp", plan.rule.strength_pp},
               {"bootstrap_rounds", plan.rule.bootstrap_rounds},
               {"bootstrap_seed", plan.rule.bootstrap_seed},
               {"level", plan.rule.level}};
  j["hp"] = hp_to_json(plan.hp);
  j["stages"] = json::array();
  for (const auto& st : plan.stages) {
    json s;
    s["name"] = st.name;
    s["backbone"] = st.backbone;
    s["encoder"] = encoder_to_json(st.encoder);
    s["cells"] = st.cells;
    s["gate_cell"] = st.gate_cell;
    s["baseline_cell"] = st.baseline_cell;
    if (st.gated_on)
      s["gated_on"] = *st.gated_on;
    else
      s["gated_on"] = nullptr;
    j["stages"].push_back(std::move(s));
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_plan: cannot write " + path);
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Event log
// ---------------------------------------------------------------------------

std::string event_to_json(const RunEvent& e) {
  json j;
  j["ts"] = e.timestamp;
  j["kind"] = e.kind;
  j["stage"] = e.stage;
  j["cell"] = e.cell;
  j["seed"] = e.seed;
  j["attempt"] = e.attempt;
  j["detail"] = e.detail;
  return j.dump();
}

RunEvent event_from_json(const std::string& line) {
  const json j = json::parse(line);
  RunEvent e;
  e.timestamp = j.at("ts").get<std::string>();
  e.kind = j.at("kind").get<std::string>();
  e.stage = j.at("stage").get<std::string>();
  e.cell = j.at("cell").get<std::string>();
  e.seed = j.at("seed").get<std::uint64_t>();
  e.attempt = j.at("attempt").get<int>();
  e.detail = j.at("detail").get<std::string>();
  return e;
}

std::map<std::string, RunState> replay_state(std::span<const RunEvent> events) {
  std::map<std::string, RunState> states;
  const auto key = [](const RunEvent& e) {
    return e.stage + "/" + e.cell + "/" + std::to_string(e.seed);
  };
  for (const RunEvent& e : events) {
    RunState& s = states[key(e)];
    if (e.kind == "run-started") {
      s.status = RunStatus::kRunning;
      s.attempts = e.attempt;
    } else if (e.kind == "run-done") {
      s.status = RunStatus::kDone;
    } else if (e.kind == "infra-retry") {
      s.status = RunStatus::kInfraRetrying;
      ++s.infra_retries;
    } else if (e.kind == "substituted") {
      s.status = RunStatus::kSubstituted;
      s.substituted_with = std::stoull(e.detail);
    } else if (e.kind == "run-failed") {
      s.status = RunStatus::kFailed;
    }
  }
  return states;
}

// ---------------------------------------------------------------------------
// Campaign state machine
// ---------------------------------------------------------------------------

namespace {

std::string now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%FT%TZ", &tm);
  return buf;
}

struct CampaignContext {
  const CampaignPlan& plan;
  const Executor& executor;
  std::ostream& operator_log;
  const Analyzer& analyzer;
  std::ofstream events;
  CampaignResult result;
  std::vector<std::pair<std::string, std::string>> raw_logs;  // path, content
  std::optional<std::vector<int>> reference_gold;
  std::size_t backup_pos = 0;

  void op_line(const std::string& s) { operator_log << redact_metrics(s) << '\n'; }

  void emit(const std::string& kind, const StageSpec& stage, const std::string& cell,
            std::uint64_t seed, int attempt, const std::string& detail = "") {
    RunEvent e{now_iso8601(), kind, stage.name, cell, seed, attempt, detail};
    events << event_to_json(e) << '\n';
    events.flush();
    op_line("[" + stage.name + "/" + cell + "] seed " + std::to_string(seed) +
            " attempt " + std::to_string(attempt) + ": " + kind +
            (detail.empty() ? "" : " (" + detail + ")"));
  }

  std::string run_key(const StageSpec& stage, const std::string& cell,
                      std::uint64_t seed) const {
    return stage.name + "/" + cell + "/" + std::to_string(seed);
  }

  std::string pred_path(const StageSpec& stage, const std::string& cell,
                        std::uint64_t seed) const {
    return plan.output_root + "/" + stage.name + "/" + cell + "/seed-" +
           std::to_string(seed) + ".preds.tsv";
  }

  void abort_campaign(const StageSpec& stage, const std::string& cell,
                      std::uint64_t seed, int attempt, const std::string& reason) {
    result.aborted = true;
    result.abort_reason = reason;
    emit("campaign-abort", stage, cell, seed, attempt, reason);
  }

  void quarantine_outputs(const StageSpec& stage, const std::string& cell,
                          std::uint64_t seed, int attempt) {
    const fs::path src = pred_path(stage, cell, seed);
    if (!fs::exists(src)) return;
    const fs::path dir = fs::path(plan.output_root) / "quarantine";
    fs::create_directories(dir);
    const fs::path dst = dir / (stage.name + "-" + cell + "-seed" +
                                std::to_string(seed) + "-attempt" +
                                std::to_string(attempt) + ".preds.tsv");
    fs::rename(src, dst);
  }

  enum class CellRun { kDone, kTrainingFailed, kAborted };

  // One (cell, seed) run with the same-seed infra-retry rule. A training
  // failure is reported to the caller, which owns seed substitution.
  CellRun run_cell_seed(const StageSpec& stage, const std::string& cell,
                        std::uint64_t seed) {
    for (;;) {
      RunState& state = result.run_states[run_key(stage, cell, seed)];
      ++state.attempts;
      state.status = RunStatus::kRunning;
      emit("run-started", stage, cell, seed, state.attempts);

      const std::string out_path = pred_path(stage, cell, seed);
      fs::create_directories(fs::path(out_path).parent_path());
      const RunOutcome outcome = executor(stage, cell, seed, out_path);

      raw_logs.emplace_back(plan.output_root + "/raw_logs/" + stage.name + "-" +
                                cell + "-seed" + std::to_string(seed) +
                                "-attempt" + std::to_string(state.attempts) + ".log",
                            outcome.log_text);
      std::istringstream lines(outcome.log_text);
      std::string line;
      while (std::getline(lines, line)) op_line("  | " + line);

      if (outcome.success) {
        PredictionFile pf;
        try {
          pf = read_prediction_file(out_path);
        } catch (const std::exception& e) {
          abort_campaign(stage, cell, seed, state.attempts,
                         std::string("unreadable prediction file: ") + e.what());
          return CellRun::kAborted;
        }
        if (!reference_gold) {
          std::unordered_set<std::string> ids;
          for (const auto& r : pf.rows)
            if (!ids.insert(r.id).second) {
              abort_campaign(stage, cell, seed, state.attempts,
                             "duplicate-id:" + r.id);
              return CellRun::kAborted;
            }
          reference_gold = pf.gold();
        } else if (auto issue = validate_prediction_file(pf, *reference_gold)) {
          abort_campaign(stage, cell, seed, state.attempts, *issue);
          return CellRun::kAborted;
        }
        state.status = RunStatus::kDone;
        emit("run-done", stage, cell, seed, state.attempts);
        return CellRun::kDone;
      }

      const FailureKind kind = classify_failure(outcome.log_text);
      if (kind == FailureKind::kInfra) {
        if (state.infra_retries < 2) {
          ++state.infra_retries;
          state.status = RunStatus::kInfraRetrying;
          emit("infra-retry", stage, cell, seed, state.attempts);
          continue;  // same seed
        }
        abort_campaign(stage, cell, seed, state.attempts,
                       "infrastructure retries exhausted");
        return CellRun::kAborted;
      }

      state.status = RunStatus::kFailed;
      emit("run-failed", stage, cell, seed, state.attempts, "training");
      quarantine_outputs(stage, cell, seed, state.attempts);
      return CellRun::kTrainingFailed;
    }
  }

  // One seed slot across every cell of the stage. A training failure in
  // any cell retires the slot's seed stage-wide: completed sibling runs
  // are quarantined and the whole slot reruns on the next unused backup,
  // so the per-cell seed sets stay matched for the seed-paired analysis.
  bool run_slot(const StageSpec& stage, std::uint64_t primary_seed,
                StageReport& report) {
    std::uint64_t seed = primary_seed;
    for (;;) {
      bool training_failed = false;
      std::size_t completed_cells = 0;
      for (const std::string& cell : stage.cells) {
        const CellRun run = run_cell_seed(stage, cell, seed);
        if (run == CellRun::kAborted) return false;
        if (run == CellRun::kTrainingFailed) {
          training_failed = true;
          break;
        }
        ++completed_cells;
      }
      if (!training_failed) {
        for (const std::string& cell : stage.cells)
          report.completed_seeds[cell].push_back(seed);
        return true;
      }

      if (backup_pos >= plan.backup_seeds.size()) {
        abort_campaign(stage, stage.cells.back(), seed, 0, "backup pool exhausted");
        return false;
      }
      const std::uint64_t replacement = plan.backup_seeds[backup_pos++];
      for (std::size_t i = 0; i <= completed_cells && i < stage.cells.size(); ++i) {
        const std::string& cell = stage.cells[i];
        RunState& state = result.run_states[run_key(stage, cell, seed)];
        if (i < completed_cells) quarantine_outputs(stage, cell, seed, state.attempts);
        state.status = RunStatus::kSubstituted;
        state.substituted_with = replacement;
        emit("substituted", stage, cell, seed, state.attempts,
             std::to_string(replacement));
      }
      report.substitutions.push_back(std::to_string(seed) + " -> " +
                                     std::to_string(replacement));
      seed = replacement;
    }
  }
};

}  // namespace

Verdict analyze_with_rule(const std::vector<PredictionFile>& method,
                          const std::vector<PredictionFile>& baseline,
                          const DecisionRule& rule) {
  const SeedDeltaSeries series = per_seed_deltas(method, baseline);
  const BootstrapParams boot{rule.bootstrap_rounds, rule.bootstrap_seed, rule.level};
  const IntervalEstimate est = interval_estimate(series.deltas(), boot);
  return decide(est.mean, est.boot_lo, est.t_lo, rule.mean_pp, rule.strength_pp);
}

CampaignResult run_campaign(const CampaignPlan& plan, const Executor& executor,
                            std::ostream& operator_log, const Analyzer& analyzer) {
  if (plan.stages.empty()) throw std::invalid_argument("run_campaign: no stages");
  if (plan.primary_seeds.empty())
    throw std::invalid_argument("run_campaign: no primary seeds");

  fs::create_directories(plan.output_root);
  const Analyzer effective_analyzer =
      analyzer ? analyzer : Analyzer(analyze_with_rule);

  CampaignContext ctx{plan, executor, operator_log, effective_analyzer,
                      std::ofstream(plan.output_root + "/events.jsonl",
                                    std::ios::binary | std::ios::app),
                      {}, {}, {}, 0};
  if (!ctx.events)
    throw std::runtime_error("run_campaign: cannot open the event log");

  std::map<std::string, Verdict> verdicts;

  for (const StageSpec& stage : plan.stages) {
    StageReport report;
    report.name = stage.name;

    if (stage.gated_on) {
      // Gate purity: the launch decision reads the gating stage's
      // verdict and nothing else.
      auto it = verdicts.find(*stage.gated_on);
      if (it == verdicts.end() || !it->second.c1_pass) {
        ctx.op_line("stage " + stage.name + " skipped: gate " + *stage.gated_on +
                    " did not pass");
        ctx.result.stages.push_back(std::move(report));
        continue;
      }
    }

    report.executed = true;

    for (std::uint64_t seed : plan.primary_seeds) {
      if (!ctx.run_slot(stage, seed, report)) {
        ctx.result.stages.push_back(std::move(report));
        for (const auto& [path, content] : ctx.raw_logs) {
          fs::create_directories(fs::path(path).parent_path());
          std::ofstream raw(path, std::ios::binary);
          raw << content;
          ctx.result.raw_log_paths.push_back(path);
        }
        return std::move(ctx.result);
      }
    }

    std::map<std::string, std::vector<PredictionFile>> files_by_cell;
    for (const std::string& cell : stage.cells)
      for (std::uint64_t seed : report.completed_seeds[cell])
        files_by_cell[cell].push_back(
            read_prediction_file(ctx.pred_path(stage, cell, seed)));

    const bool has_gate_cells = files_by_cell.count(stage.gate_cell) &&
                                files_by_cell.count(stage.baseline_cell);
    if (has_gate_cells) {
      // The locked rule is evaluated exactly once per stage.
      const Verdict v = ctx.analyzer(files_by_cell[stage.gate_cell],
                                     files_by_cell[stage.baseline_cell], plan.rule);
      report.gate_evaluated = true;
      report.verdict = v;
      verdicts[stage.name] = v;
      RunEvent e{now_iso8601(), "stage-gate", stage.name, stage.gate_cell, 0, 0,
                 v.c1_pass ? "pass" : "fail"};
      ctx.events << event_to_json(e) << '\n';
      ctx.op_line("stage " + stage.name + " gate: " +
                  std::string(v.c1_pass ? "PASS" : "FAIL"));
    }
    ctx.result.stages.push_back(std::move(report));
  }

  // A failed primary gate commits to closing the family.
  if (!ctx.result.stages.empty() && ctx.result.stages.front().verdict &&
      !ctx.result.stages.front().verdict->c1_pass)
    ctx.result.family_closed = true;

  // Seal the raw, unredacted logs only after the campaign has finished.
  for (const auto& [path, content] : ctx.raw_logs) {
    fs::create_directories(fs::path(path).parent_path());
    std::ofstream raw(path, std::ios::binary);
    raw << content;
    ctx.result.raw_log_paths.push_back(path);
  }
  return std::move(ctx.result);
}

}  // namespace csip
