#include "csip/cli.hpp"

#include "csip/data.hpp"
#include "csip/orchestrator.hpp"
#include "csip/report.hpp"
#include "csip/stratify.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

namespace csip::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

/// CSIP_OUTPUT_ROOT, when set, anchors relative output paths. Nothing
/// else is read from the environment.
std::string resolve_out(const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  const char* root = std::getenv("CSIP_OUTPUT_ROOT");
  if (root == nullptr || *root == '\0') return path;
  return (fs::path(root) / path).string();
}

std::vector<Record> load_records(const std::string& path) {
  return ingest_split(path).first;
}

struct HyperFlags {
  Hyperparameters hp;       // paper defaults
  EncoderConfig encoder{8192, 768, 512, 0.1, "toy"};
  bool desk = false;

  void add_to(CLI::App* cmd) {
    cmd->add_flag("--desk", desk,
                  "desk-scale preset: hidden 32, max_len 64, lr 1e-2");
    cmd->add_option("--lr", hp.lr, "base learning rate")->capture_default_str();
    cmd->add_option("--weight-decay", hp.weight_decay, "AdamW weight decay")
        ->capture_default_str();
    cmd->add_option("--warmup-ratio", hp.warmup_ratio, "linear warmup ratio")
        ->capture_default_str();
    cmd->add_option("--clip-norm", hp.clip_norm, "global gradient-norm clip")
        ->capture_default_str();
    cmd->add_option("--dropout", hp.dropout, "dropout probability")
        ->capture_default_str();
    cmd->add_option("--lambda-select", hp.lambda_select,
                    "selectivity coefficient")
        ->capture_default_str();
    cmd->add_option("--lambda-remain", hp.lambda_remain, "replay coefficient")
        ->capture_default_str();
    cmd->add_option("--stage1-epochs", hp.stage1_epochs, "pretraining epochs")
        ->capture_default_str();
    cmd->add_option("--stage1-batch", hp.stage1_batch, "pretraining batch size")
        ->capture_default_str();
    cmd->add_option("--stage2-epochs", hp.stage2_epochs, "fine-tuning epochs")
        ->capture_default_str();
    cmd->add_option("--ft-batch", hp.ft_batch, "fine-tuning batch size")
        ->capture_default_str();
    cmd->add_option("--replay-batch", hp.replay_batch, "replay batch size")
        ->capture_default_str();
    cmd->add_option("--vocab", encoder.vocab, "tokenizer vocabulary size")
        ->capture_default_str();
    cmd->add_option("--hidden", encoder.hidden, "encoder hidden size")
        ->capture_default_str();
    cmd->add_option("--max-len", encoder.max_len, "max joint sequence length")
        ->capture_default_str();
    cmd->add_option("--backbone-name", encoder.name, "encoder config name")
        ->capture_default_str();
  }

  /// Precedence: explicit flag > --desk preset > paper default.
  void finalize(CLI::App* cmd) {
    if (!desk) {
      encoder.dropout = hp.dropout;
      return;
    }
    if (cmd->count("--hidden") == 0) encoder.hidden = 32;
    if (cmd->count("--max-len") == 0) encoder.max_len = 64;
    if (cmd->count("--lr") == 0) hp.lr = Hyperparameters::desk().lr;
    encoder.dropout = hp.dropout;
  }
};

std::array<int, kNumClasses> parse_counts(const std::string& csv) {
  std::array<int, kNumClasses> out{};
  std::stringstream ss(csv);
  std::string item;
  int i = 0;
  while (std::getline(ss, item, ',')) {
    if (i >= kNumClasses) throw CLI::ValidationError("counts", "expected 5 values");
    out[static_cast<std::size_t>(i++)] = std::stoi(item);
  }
  if (i != kNumClasses) throw CLI::ValidationError("counts", "expected 5 values");
  return out;
}

std::vector<PredictionFile> read_pred_files(const std::vector<std::string>& paths) {
  std::vector<PredictionFile> files;
  files.reserve(paths.size());
  for (const auto& p : paths) files.push_back(read_prediction_file(p));
  return files;
}

// ---------------------------------------------------------------------------
// Subcommand bodies
// ---------------------------------------------------------------------------

int run_gen_data(const std::string& out_dir, CorpusConfig cfg) {
  const SyntheticCorpus corpus = generate_synthetic_corpus(cfg);
  write_corpus(corpus, resolve_out(out_dir));
  std::cout << "wrote " << corpus.train.size() << "/" << corpus.val.size() << "/"
            << corpus.test.size() << " records to " << resolve_out(out_dir) << "\n";
  return kOk;
}

int run_ingest_audit(const std::vector<std::string>& files, const std::string& out) {
  json report = json::object();
  for (const auto& path : files) {
    const auto [records, skip] = ingest_split(path);
    json entry;
    entry["kept"] = skip.kept;
    entry["skipped_decode"] = skip.skipped_decode;
    entry["skipped_label"] = skip.skipped_label;
    entry["label_counts"] = skip.label_counts;
    report[path] = entry;
    std::cout << path << ": kept " << skip.kept << ", skipped decode "
              << skip.skipped_decode << ", skipped label " << skip.skipped_label
              << "\n";
  }
  if (!out.empty()) {
    std::ofstream f(resolve_out(out), std::ios::binary);
    if (!f) throw std::runtime_error("ingest-audit: cannot write " + out);
    f << report.dump(2) << '\n';
  }
  return kOk;
}

int run_derive_seeds(const std::string& hex, int n_primary, int n_backup,
                     std::uint64_t pool_min, std::uint64_t pool_max,
                     const std::vector<std::uint64_t>& banned,
                     const std::string& out) {
  std::vector<std::uint64_t> pool;
  pool.reserve(pool_max - pool_min + 1);
  for (std::uint64_t s = pool_min; s <= pool_max; ++s) pool.push_back(s);
  const auto [primary, backup] = derive_seeds(hex, n_primary, n_backup, banned, pool);
  json j;
  j["generator_seed"] = std::stoull(hex, nullptr, 16);
  j["primary"] = primary;
  j["backup"] = backup;
  const std::string text = j.dump(2);
  std::cout << text << "\n";
  if (!out.empty()) {
    std::ofstream f(resolve_out(out), std::ios::binary);
    if (!f) throw std::runtime_error("derive-seeds: cannot write " + out);
    f << text << '\n';
  }
  return kOk;
}

Model train_cell(const std::string& cell, const std::string& stage,
                 const std::vector<Record>& train, const std::vector<Record>& val,
                 const EncoderConfig& encoder, const Hyperparameters& hp,
                 std::uint64_t seed, const std::string& checkpoint_path) {
  if (cell == "c2") {
    return train_baseline_c2(train, val, encoder, hp, seed).model;
  }
  Model checkpoint;
  if (stage == "finetune") {
    if (checkpoint_path.empty())
      throw std::invalid_argument("train: --checkpoint required for stage finetune");
    checkpoint = load_model(checkpoint_path);
  } else {
    checkpoint = stage1_pretrain(build_csip_triplets(train, encoder), encoder, hp, seed);
  }
  if (stage == "pretrain") return checkpoint;
  if (cell == "v1") return stage2_v1(checkpoint, train, val, hp, seed).model;
  // Replay triplets are tokenized under the checkpoint's encoder config.
  const auto triplets = build_csip_triplets(train, checkpoint.config);
  return stage2_v2(checkpoint, train, triplets, val, hp, seed).model;
}

int run_predict(const std::string& model_path, const std::string& test_path,
                const std::string& out) {
  const Model model = load_model(model_path);
  const auto test = load_records(test_path);
  PredictionFile pf;
  pf.cell = model.provenance.cell.empty() ? model.provenance.stage
                                          : model.provenance.cell;
  pf.backbone = model.provenance.backbone;
  pf.seed = model.provenance.seed;
  pf.rows = predict_test(model, test);
  write_prediction_file(pf, resolve_out(out));
  std::cout << "wrote " << pf.rows.size() << " predictions to " << resolve_out(out)
            << "\n";
  return kOk;
}

int run_analyze(const std::vector<std::string>& method_paths,
                const std::vector<std::string>& baseline_paths,
                const DecisionRule& rule, const std::string& out_json,
                const std::string& out_text, long example_rounds) {
  const auto method = read_pred_files(method_paths);
  const auto baseline = read_pred_files(baseline_paths);
  const AnalysisReport report = analyze_files(method, baseline, rule);
  std::cout << report_to_text(report);
  if (example_rounds > 0) {
    const auto [lo, hi] = example_bootstrap_ci(method, baseline, example_rounds,
                                               rule.bootstrap_seed, rule.level);
    char line[160];
    std::snprintf(line, sizeof(line),
                  "example-conditional %d%% CI [%+.3f, %+.3f] (B=%ld; secondary, "
                  "never upgrades a primary FAIL)\n",
                  static_cast<int>(rule.level * 100), lo, hi, example_rounds);
    std::cout << line;
  }
  write_analysis_report(report, out_json.empty() ? "" : resolve_out(out_json),
                        out_text.empty() ? "" : resolve_out(out_text));
  return kOk;
}

json estimate_to_json(const IntervalEstimate& e) {
  return {{"mean", e.mean},   {"sd", e.sd},     {"boot_lo", e.boot_lo},
          {"boot_hi", e.boot_hi}, {"t_lo", e.t_lo}, {"t_hi", e.t_hi},
          {"n", e.n}};
}

int run_stratify(const std::string& train_path, const std::string& test_path,
                 const std::string& val_path, const std::string& export_path,
                 const std::vector<std::string>& method_paths,
                 const std::vector<std::string>& baseline_paths,
                 const DecisionRule& rule, const std::string& out_json) {
  const auto train = load_records(train_path);
  const auto test = load_records(test_path);
  const Stratification unseen = partition_seen_unseen(train, test);
  const Stratification super_unseen = partition_super(train, test);

  json j;
  j["unseen_gb"] = unseen.stratum_size;
  j["seen_gb"] = unseen.complement_size;
  j["super_unseen"] = super_unseen.stratum_size;
  j["super_seen"] = super_unseen.complement_size;
  j["train_unique_superiors"] = unique_superior_keys(train);

  if (!export_path.empty()) {
    std::ofstream out(resolve_out(export_path), std::ios::binary);
    if (!out) throw std::runtime_error("stratify: cannot write " + export_path);
    out << "id\tseen_gb\tsuper_seen\n";
    for (std::size_t i = 0; i < test.size(); ++i)
      out << test[i].id << '\t' << (unseen.in_stratum[i] ? 0 : 1) << '\t'
          << (super_unseen.in_stratum[i] ? 0 : 1) << '\n';
  }

  if (!val_path.empty()) {
    const auto val = load_records(val_path);
    const OverlapAudit audit = overlap_audit(train, val, test);
    json ja = json::object();
    for (const auto& [key, pairs] : audit.counts) {
      json jp = json::object();
      for (const auto& [pair_name, c] : pairs)
        jp[pair_name] = {{"distinct", c.distinct},
                         {"affected_first", c.affected_first},
                         {"affected_second", c.affected_second}};
      ja[key] = jp;
    }
    j["overlap"] = ja;
  }

  if (!method_paths.empty()) {
    const auto method = read_pred_files(method_paths);
    const auto baseline = read_pred_files(baseline_paths);
    const BootstrapParams boot = rule.bootstrap();
    const std::vector<char> all(test.size(), 1);
    std::vector<char> seen(test.size()), super_seen_m(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
      seen[i] = unseen.in_stratum[i] ? 0 : 1;
      super_seen_m[i] = super_unseen.in_stratum[i] ? 0 : 1;
    }
    const auto add = [&](const char* name, const std::vector<char>& member) {
      auto est = stratified_deltas(method, baseline, member, boot);
      j["estimates"][name] =
          est ? estimate_to_json(*est) : json(nullptr);
    };
    add("full", all);
    add("unseen_gb", unseen.in_stratum);
    add("seen_gb", seen);
    add("super_unseen", super_unseen.in_stratum);
    add("super_seen", super_seen_m);

    if (auto per_class = per_class_stratum_delta(method, baseline,
                                                 unseen.in_stratum, rule.level)) {
      json pc = json::array();
      for (int c = 0; c < kNumClasses; ++c) {
        const auto& d = (*per_class)[static_cast<std::size_t>(c)];
        pc.push_back({{"class", kLabelNames[static_cast<std::size_t>(c)]},
                      {"mean", d.mean},
                      {"t_lo", d.t_lo},
                      {"t_hi", d.t_hi},
                      {"lower_bound_positive", d.lower_bound_positive}});
      }
      j["per_class_unseen_gb"] = pc;
    }
  }

  const std::string text = j.dump(2);
  std::cout << text << "\n";
  if (!out_json.empty()) {
    std::ofstream f(resolve_out(out_json), std::ios::binary);
    if (!f) throw std::runtime_error("stratify: cannot write " + out_json);
    f << text << '\n';
  }
  return kOk;
}

int run_matched_compare(const std::vector<std::string>& a_method,
                        const std::vector<std::string>& a_baseline,
                        const std::vector<std::string>& b_method,
                        const std::vector<std::string>& b_baseline,
                        const DecisionRule& rule, const std::string& out_json) {
  const SeedDeltaSeries a =
      per_seed_deltas(read_pred_files(a_method), read_pred_files(a_baseline));
  const SeedDeltaSeries b =
      per_seed_deltas(read_pred_files(b_method), read_pred_files(b_baseline));
  const PairedSummary summary = matched_seed_compare(a, b, rule.bootstrap());

  json j;
  j["estimate"] = estimate_to_json(summary.estimate);
  j["per_seed"] = json::array();
  for (std::size_t i = 0; i < summary.seeds.size(); ++i)
    j["per_seed"].push_back(
        {{"seed", summary.seeds[i]}, {"difference", summary.differences[i]}});
  const std::string text = j.dump(2);
  std::cout << text << "\n";
  if (!out_json.empty()) {
    std::ofstream f(resolve_out(out_json), std::ios::binary);
    if (!f) throw std::runtime_error("matched-compare: cannot write " + out_json);
    f << text << '\n';
  }
  return kOk;
}

int run_validate_preds(const std::vector<std::string>& paths) {
  if (paths.empty()) throw std::invalid_argument("validate-preds: no files");
  const auto files = read_pred_files(paths);
  const std::vector<int> reference = files.front().gold();
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (auto issue = validate_prediction_file(files[i], reference))
      throw AbortError(paths[i] + ": " + *issue);
  }
  std::cout << "ok: " << files.size() << " file(s), " << reference.size()
            << " rows each\n";
  return kOk;
}

/// The production executor: trains the requested cell and writes its
/// prediction file. Stage-1 checkpoints are cached per (stage, seed);
/// pretraining is a pure function of (triplets, config, hp, seed), so v1
/// and v2 share them.
class TrainingExecutor {
 public:
  TrainingExecutor(const CampaignPlan& plan)
      : hp_(plan.hp),
        train_(load_records(plan.data_dir + "/train.jsonl")),
        val_(load_records(plan.data_dir + "/val.jsonl")),
        test_(load_records(plan.data_dir + "/test.jsonl")) {}

  RunOutcome operator()(const StageSpec& stage, const std::string& cell,
                        std::uint64_t seed, const std::string& out_path) {
    std::string log;
    try {
      Model model = train(stage, cell, seed, log);
      PredictionFile pf;
      pf.cell = cell;
      pf.backbone = stage.backbone;
      pf.seed = seed;
      pf.rows = predict_test(model, test_);
      write_prediction_file(pf, out_path);
      log += "predictions written: " + std::to_string(pf.rows.size()) + " rows\n";
      return {true, log};
    } catch (const TrainingFailure& e) {
      log += std::string("training failure: ") + e.what() + "\n";
      return {false, log};
    }
  }

 private:
  Model train(const StageSpec& stage, const std::string& cell, std::uint64_t seed,
              std::string& log) {
    if (cell == "c2") {
      auto result = train_baseline_c2(train_, val_, stage.encoder, hp_, seed);
      log += finetune_log(result);
      return std::move(result.model);
    }
    const Model& checkpoint = stage1_for(stage, seed, log);
    const auto triplets = build_csip_triplets(train_, stage.encoder);
    auto result = cell == "v1"
                      ? stage2_v1(checkpoint, train_, val_, hp_, seed)
                      : stage2_v2(checkpoint, train_, triplets, val_, hp_, seed);
    log += finetune_log(result);
    return std::move(result.model);
  }

  const Model& stage1_for(const StageSpec& stage, std::uint64_t seed,
                          std::string& log) {
    const std::string key = stage.name + "/" + std::to_string(seed);
    auto it = stage1_cache_.find(key);
    if (it != stage1_cache_.end()) return it->second;
    const auto triplets = build_csip_triplets(train_, stage.encoder);
    log += "stage1: " + std::to_string(triplets.size()) + " triplets\n";
    auto [pos, inserted] = stage1_cache_.emplace(
        key, stage1_pretrain(triplets, stage.encoder, hp_, seed));
    return pos->second;
  }

  static std::string finetune_log(const FinetuneResult& r) {
    std::string log;
    for (std::size_t e = 0; e < r.val_macro_f1.size(); ++e) {
      char line[96];
      std::snprintf(line, sizeof(line), "epoch %zu done, val macro_f1=%.2f\n",
                    e + 1, r.val_macro_f1[e]);
      log += line;
    }
    log += "best epoch: " + std::to_string(r.best_epoch) + "\n";
    return log;
  }

  Hyperparameters hp_;
  std::vector<Record> train_;
  std::vector<Record> val_;
  std::vector<Record> test_;
  std::map<std::string, Model> stage1_cache_;
};

int run_orchestrate(const std::string& plan_path, const std::string& output_root) {
  CampaignPlan plan = load_plan(plan_path);
  if (!output_root.empty()) plan.output_root = output_root;
  plan.output_root = resolve_out(plan.output_root);

  fs::create_directories(plan.output_root);
  std::ofstream operator_file(plan.output_root + "/operator.log", std::ios::binary);
  struct Tee : std::ostream, std::streambuf {
    std::ostream& a;
    std::ostream& b;
    Tee(std::ostream& a, std::ostream& b) : std::ostream(this), a(a), b(b) {}
    int overflow(int c) override {
      if (c != EOF) {
        a.put(static_cast<char>(c));
        b.put(static_cast<char>(c));
      }
      return c;
    }
  } tee(std::cout, operator_file);

  TrainingExecutor executor(plan);
  const CampaignResult result = run_campaign(plan, std::ref(executor), tee);

  // Per-stage analysis reports from the files on disk.
  json report;
  report["plan"] = plan.name;
  report["aborted"] = result.aborted;
  report["abort_reason"] = result.abort_reason;
  report["family_closed"] = result.family_closed;
  report["stages"] = json::array();
  for (const auto& stage : result.stages) {
    json s;
    s["name"] = stage.name;
    s["executed"] = stage.executed;
    s["gate_evaluated"] = stage.gate_evaluated;
    s["substitutions"] = stage.substitutions;
    json seeds = json::object();
    for (const auto& [cell, list] : stage.completed_seeds) seeds[cell] = list;
    s["completed_seeds"] = seeds;
    if (stage.verdict) {
      s["verdict"] = {{"c1_pass", stage.verdict->c1_pass},
                      {"c1_prime", stage.verdict->c1_prime},
                      {"mean", stage.verdict->mean},
                      {"boot_lo", stage.verdict->boot_lo},
                      {"t_lo", stage.verdict->t_lo}};
    } else {
      s["verdict"] = nullptr;
    }
    report["stages"].push_back(std::move(s));

    if (!stage.executed || !stage.gate_evaluated) continue;
    const auto* spec = [&]() -> const StageSpec* {
      for (const auto& sp : plan.stages)
        if (sp.name == stage.name) return &sp;
      return nullptr;
    }();
    if (spec == nullptr) continue;
    std::vector<PredictionFile> method, baseline;
    for (std::uint64_t seed : stage.completed_seeds.at(spec->gate_cell))
      method.push_back(read_prediction_file(plan.output_root + "/" + stage.name +
                                            "/" + spec->gate_cell + "/seed-" +
                                            std::to_string(seed) + ".preds.tsv"));
    for (std::uint64_t seed : stage.completed_seeds.at(spec->baseline_cell))
      baseline.push_back(read_prediction_file(
          plan.output_root + "/" + stage.name + "/" + spec->baseline_cell +
          "/seed-" + std::to_string(seed) + ".preds.tsv"));
    const AnalysisReport analysis = analyze_files(method, baseline, plan.rule);
    const std::string base = plan.output_root + "/" + stage.name + "/analysis";
    write_analysis_report(analysis, base + ".json", base + ".txt");
  }

  std::ofstream rf(plan.output_root + "/campaign_report.json", std::ios::binary);
  if (!rf) throw std::runtime_error("orchestrate: cannot write the campaign report");
  rf << report.dump(2) << '\n';

  if (result.aborted) {
    std::cerr << "campaign aborted: " << result.abort_reason << "\n";
    return kAbortedInvariant;
  }
  return kOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"typed counterfactual pretraining harness"};
  app.require_subcommand(1);

  // gen-data ---------------------------------------------------------------
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
  std::string gen_out = "data";
  CorpusConfig corpus_cfg;
  std::string gen_train_counts, gen_val_counts, gen_test_counts;
  gen->add_option("--out", gen_out, "output directory")->capture_default_str();
  gen->add_option("--seed", corpus_cfg.seed, "generator seed")->capture_default_str();
  gen->add_option("--train-counts", gen_train_counts,
                  "five comma-separated per-class train counts");
  gen->add_option("--val-counts", gen_val_counts, "per-class val counts");
  gen->add_option("--test-counts", gen_test_counts, "per-class test counts");
  gen->add_option("--seen-frac", corpus_cfg.seen_gb_fraction,
                  "fraction of test records sharing an (A, revision) tuple with train")
      ->capture_default_str();
  gen->add_option("--super-seen-frac", corpus_cfg.super_seen_fraction,
                  "fraction of test records sharing a superior with train")
      ->capture_default_str();

  // ingest-audit -----------------------------------------------------------
  auto* audit = app.add_subcommand("ingest-audit", "ingest splits and report skips");
  std::vector<std::string> audit_files;
  std::string audit_out;
  audit->add_option("files", audit_files, "record files")->required();
  audit->add_option("--out", audit_out, "JSON report path");

  // derive-seeds -----------------------------------------------------------
  auto* seeds = app.add_subcommand("derive-seeds", "derive primary/backup seed lists");
  std::string hex = "8607bca5";
  int n_primary = 18, n_backup = 12;
  std::uint64_t pool_min = 1, pool_max = 9999;
  std::vector<std::uint64_t> banned;
  std::string seeds_out;
  seeds->add_option("--hex", hex, "hex prefix seeding the generator")
      ->capture_default_str();
  seeds->add_option("--n-primary", n_primary, "primary seed count")
      ->capture_default_str();
  seeds->add_option("--n-backup", n_backup, "backup seed count")
      ->capture_default_str();
  seeds->add_option("--pool-min", pool_min, "candidate pool lower bound")
      ->capture_default_str();
  seeds->add_option("--pool-max", pool_max, "candidate pool upper bound")
      ->capture_default_str();
  seeds->add_option("--banned", banned, "seeds excluded from the pool");
  seeds->add_option("--out", seeds_out, "JSON output path");

  // train ------------------------------------------------------------------
  auto* train = app.add_subcommand("train", "train one cell");
  std::string cell, stage = "full", train_path, val_path, model_out, checkpoint_path;
  std::uint64_t train_seed = 1;
  HyperFlags hf;
  train->add_option("--cell", cell, "c2 | v1 | v2")
      ->required()
      ->check(CLI::IsMember({"c2", "v1", "v2"}));
  train->add_option("--stage", stage, "pretrain | finetune | full")
      ->check(CLI::IsMember({"pretrain", "finetune", "full"}))
      ->capture_default_str();
  train->add_option("--train", train_path, "training records")->required();
  train->add_option("--val", val_path, "validation records");
  train->add_option("--seed", train_seed, "run seed")->capture_default_str();
  train->add_option("--out", model_out, "model output path")->required();
  train->add_option("--checkpoint", checkpoint_path,
                    "stage-1 checkpoint (stage finetune)");
  hf.add_to(train);

  // predict ----------------------------------------------------------------
  auto* predict = app.add_subcommand("predict", "write a prediction file");
  std::string predict_model, predict_test_path, predict_out;
  predict->add_option("--model", predict_model, "trained model path")->required();
  predict->add_option("--test", predict_test_path, "test records")->required();
  predict->add_option("--out", predict_out, "prediction file path")->required();

  // analyze ----------------------------------------------------------------
  auto* analyze = app.add_subcommand("analyze", "locked confirmatory analysis");
  std::vector<std::string> method_paths, baseline_paths;
  DecisionRule rule;
  std::string analyze_json, analyze_text;
  long example_rounds = 0;
  analyze->add_option("--method", method_paths, "method prediction files")->required();
  analyze->add_option("--baseline", baseline_paths, "baseline prediction files")
      ->required();
  analyze->add_option("--mean-threshold", rule.mean_pp, "C1 mean threshold (pp)")
      ->capture_default_str();
  analyze->add_option("--strength-threshold", rule.strength_pp,
                      "C1' mean threshold (pp)")
      ->capture_default_str();
  analyze->add_option("--boot-rounds", rule.bootstrap_rounds, "bootstrap rounds")
      ->capture_default_str();
  analyze->add_option("--boot-seed", rule.bootstrap_seed, "bootstrap RNG seed")
      ->capture_default_str();
  analyze->add_option("--level", rule.level, "confidence level")
      ->capture_default_str();
  analyze->add_option("--out-json", analyze_json, "machine-readable report path");
  analyze->add_option("--out-text", analyze_text, "flat text summary path");
  analyze->add_option("--example-bootstrap-rounds", example_rounds,
                      "also run the example-conditional bootstrap");

  // stratify ---------------------------------------------------------------
  auto* stratify = app.add_subcommand("stratify", "tuple-overlap strata and audits");
  std::string strat_train, strat_test, strat_val, strat_export, strat_json;
  std::vector<std::string> strat_method, strat_baseline;
  DecisionRule strat_rule;
  stratify->add_option("--train", strat_train, "training records")->required();
  stratify->add_option("--test", strat_test, "test records")->required();
  stratify->add_option("--val", strat_val, "validation records (enables overlap audit)");
  stratify->add_option("--export", strat_export, "per-record stratum table (TSV)");
  stratify->add_option("--method", strat_method, "method prediction files");
  stratify->add_option("--baseline", strat_baseline, "baseline prediction files");
  stratify->add_option("--boot-rounds", strat_rule.bootstrap_rounds, "bootstrap rounds")
      ->capture_default_str();
  stratify->add_option("--boot-seed", strat_rule.bootstrap_seed, "bootstrap RNG seed")
      ->capture_default_str();
  stratify->add_option("--out-json", strat_json, "JSON output path");

  // matched-compare ----------------------------------------------------------
  auto* matched = app.add_subcommand("matched-compare",
                                     "paired comparison of two matched-seed cells");
  std::vector<std::string> a_method, a_baseline, b_method, b_baseline;
  DecisionRule matched_rule;
  std::string matched_json;
  matched->add_option("--a-method", a_method, "cell A method files")->required();
  matched->add_option("--a-baseline", a_baseline, "cell A baseline files")->required();
  matched->add_option("--b-method", b_method, "cell B method files")->required();
  matched->add_option("--b-baseline", b_baseline, "cell B baseline files")->required();
  matched->add_option("--boot-rounds", matched_rule.bootstrap_rounds, "bootstrap rounds")
      ->capture_default_str();
  matched->add_option("--boot-seed", matched_rule.bootstrap_seed, "bootstrap RNG seed")
      ->capture_default_str();
  matched->add_option("--out-json", matched_json, "JSON output path");

  // orchestrate --------------------------------------------------------------
  auto* orchestrate = app.add_subcommand("orchestrate", "run a staged campaign plan");
  std::string plan_path, orch_out;
  orchestrate->add_option("--plan", plan_path, "campaign plan (JSON)")->required();
  orchestrate->add_option("--output-root", orch_out, "override the plan's output root");

  // validate-preds -----------------------------------------------------------
  auto* validate = app.add_subcommand("validate-preds", "check prediction-file invariants");
  std::vector<std::string> validate_files;
  validate->add_option("files", validate_files, "prediction files")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (*gen) {
      if (!gen_train_counts.empty()) corpus_cfg.train_counts = parse_counts(gen_train_counts);
      if (!gen_val_counts.empty()) corpus_cfg.val_counts = parse_counts(gen_val_counts);
      if (!gen_test_counts.empty()) corpus_cfg.test_counts = parse_counts(gen_test_counts);
      return run_gen_data(gen_out, corpus_cfg);
    }
    if (*audit) return run_ingest_audit(audit_files, audit_out);
    if (*seeds)
      return run_derive_seeds(hex, n_primary, n_backup, pool_min, pool_max, banned,
                              seeds_out);
    if (*train) {
      hf.finalize(train);
      const auto train_records = load_records(train_path);
      std::vector<Record> val_records;
      if (!val_path.empty()) val_records = load_records(val_path);
      if (stage != "pretrain" && val_records.empty())
        throw std::invalid_argument("train: --val required unless stage pretrain");
      const Model model = train_cell(cell, stage, train_records, val_records,
                                     hf.encoder, hf.hp, train_seed, checkpoint_path);
      save_model(model, resolve_out(model_out));
      std::cout << "saved model to " << resolve_out(model_out) << "\n";
      return kOk;
    }
    if (*predict) return run_predict(predict_model, predict_test_path, predict_out);
    if (*analyze)
      return run_analyze(method_paths, baseline_paths, rule, analyze_json,
                         analyze_text, example_rounds);
    if (*stratify)
      return run_stratify(strat_train, strat_test, strat_val, strat_export,
                          strat_method, strat_baseline, strat_rule, strat_json);
    if (*matched)
      return run_matched_compare(a_method, a_baseline, b_method, b_baseline,
                                 matched_rule, matched_json);
    if (*orchestrate) return run_orchestrate(plan_path, orch_out);
    if (*validate) return run_validate_preds(validate_files);
    return kUsageError;
  } catch (const AbortError& e) {
    std::cerr << "aborted: " << e.what() << "\n";
    return kAbortedInvariant;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDomainError;
  }
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args;
  args.reserve(static_cast<std::size_t>(argc));
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args);
}

}  // namespace csip::cli
