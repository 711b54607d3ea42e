#include "csip/training.hpp"

#include "csip/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace csip {

using nlohmann::json;

double lr_at(long step, long total_steps, double warmup_ratio, double base_lr) {
  if (total_steps <= 0) return 0.0;
  if (step < 0 || step > total_steps)
    throw std::invalid_argument("lr_at: step outside [0, total_steps]");
  const long warmup = static_cast<long>(
      std::ceil(warmup_ratio * static_cast<double>(total_steps)));
  if (step < warmup)
    return base_lr * static_cast<double>(step) / static_cast<double>(warmup);
  if (total_steps == warmup) return step == warmup ? base_lr : 0.0;
  return base_lr * static_cast<double>(total_steps - step) /
         static_cast<double>(total_steps - warmup);
}

int best_epoch(const std::vector<double>& scores) {
  if (scores.empty()) throw std::invalid_argument("best_epoch: no scores");
  int best = 1;
  for (int e = 2; e <= static_cast<int>(scores.size()); ++e)
    if (scores[static_cast<std::size_t>(e - 1)] >
        scores[static_cast<std::size_t>(best - 1)])
      best = e;
  return best;
}

AdamW::AdamW(std::vector<TensorPtr> params, double weight_decay)
    : params_(std::move(params)), weight_decay_(weight_decay) {
  slots_.reserve(params_.size());
  for (const auto& p : params_) {
    Slot s;
    s.m = Matrix::Zero(p->value.rows(), p->value.cols());
    s.v = Matrix::Zero(p->value.rows(), p->value.cols());
    slots_.push_back(std::move(s));
  }
}

void AdamW::step(double lr) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = *params_[i];
    if (!p.touched) continue;
    Slot& s = slots_[i];
    ++s.t;
    s.m = kBeta1 * s.m + (1.0 - kBeta1) * p.grad;
    s.v = kBeta2 * s.v + (1.0 - kBeta2) * p.grad.cwiseProduct(p.grad);
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(s.t));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(s.t));
    const Matrix m_hat = s.m / c1;
    const Matrix v_hat = s.v / c2;
    p.value -=
        lr * (m_hat.array() / (v_hat.array().sqrt() + kEps)).matrix();
    if (weight_decay_ != 0.0) p.value -= lr * weight_decay_ * p.value;
  }
}

void AdamW::zero_grad() {
  for (const auto& p : params_) p->zero_grad();
}

std::vector<ParamGroup> Model::groups() const {
  std::vector<ParamGroup> gs;
  gs.push_back(encoder.group());
  if (typed_head) gs.push_back(typed_head->group());
  if (fresh_head) gs.push_back(fresh_head->group());
  if (baseline_head) gs.push_back(baseline_head->group());
  return gs;
}

std::vector<TensorPtr> Model::tensors() const {
  std::vector<TensorPtr> ts;
  for (const auto& g : groups())
    ts.insert(ts.end(), g.tensors.begin(), g.tensors.end());
  return ts;
}

Model Model::clone() const {
  Model m;
  m.config = config;
  m.provenance = provenance;
  m.encoder = encoder.clone();
  const auto copy_tensor = [](const TensorPtr& t) {
    return make_tensor(t->name, t->value);
  };
  if (typed_head) {
    TypedHeadParams t;
    t.w_phi = copy_tensor(typed_head->w_phi);
    t.b_phi = copy_tensor(typed_head->b_phi);
    t.b_t = copy_tensor(typed_head->b_t);
    t.log_w = copy_tensor(typed_head->log_w);
    t.b_nc = copy_tensor(typed_head->b_nc);
    t.log_alpha = copy_tensor(typed_head->log_alpha);
    m.typed_head = std::move(t);
  }
  if (fresh_head) {
    FreshHeadParams f;
    f.w_cls = copy_tensor(fresh_head->w_cls);
    f.b_cls = copy_tensor(fresh_head->b_cls);
    m.fresh_head = std::move(f);
  }
  if (baseline_head) {
    BaselineHeadParams b;
    b.w_c2 = copy_tensor(baseline_head->w_c2);
    b.b_c2 = copy_tensor(baseline_head->b_c2);
    m.baseline_head = std::move(b);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Model container IO: versioned text format with hexfloat values, so a
// round trip is bit-exact. Tensors are written row-major.
// ---------------------------------------------------------------------------

namespace {

void write_tensor(std::ofstream& out, const Tensor& t) {
  out << "tensor " << t.name << ' ' << t.value.rows() << ' ' << t.value.cols()
      << '\n';
  char buf[40];
  for (Eigen::Index i = 0; i < t.value.rows(); ++i) {
    for (Eigen::Index j = 0; j < t.value.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%a", t.value(i, j));
      if (j) out << ' ';
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace

void save_model(const Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_model: cannot write " + path);
  json header;
  header["config"] = {{"vocab", model.config.vocab},
                      {"hidden", model.config.hidden},
                      {"max_len", model.config.max_len},
                      {"dropout", model.config.dropout},
                      {"name", model.config.name}};
  header["provenance"] = {{"stage", model.provenance.stage},
                          {"cell", model.provenance.cell},
                          {"backbone", model.provenance.backbone},
                          {"seed", model.provenance.seed},
                          {"epoch", model.provenance.epoch}};
  out << "csip-model v1\n" << header.dump() << '\n';
  for (const auto& g : model.groups()) {
    out << "group " << to_string(g.tag) << ' ' << g.tensors.size() << '\n';
    for (const auto& t : g.tensors) write_tensor(out, *t);
  }
  out << "end\n";
  if (!out) throw std::runtime_error("save_model: write failed for " + path);
}

namespace {

Matrix read_tensor_values(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  std::string line;
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!std::getline(in, line))
      throw std::runtime_error("load_model: truncated tensor block");
    const char* p = line.c_str();
    char* end = nullptr;
    for (Eigen::Index j = 0; j < cols; ++j) {
      m(i, j) = std::strtod(p, &end);
      if (end == p) throw std::runtime_error("load_model: malformed value");
      p = end;
    }
  }
  return m;
}

}  // namespace

Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_model: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "csip-model v1")
    throw std::runtime_error("load_model: bad magic in " + path);
  if (!std::getline(in, line)) throw std::runtime_error("load_model: missing header");
  const json header = json::parse(line);

  Model model;
  const auto& cfg = header.at("config");
  model.config.vocab = cfg.at("vocab").get<int>();
  model.config.hidden = cfg.at("hidden").get<int>();
  model.config.max_len = cfg.at("max_len").get<int>();
  model.config.dropout = cfg.at("dropout").get<double>();
  model.config.name = cfg.at("name").get<std::string>();
  const auto& prov = header.at("provenance");
  model.provenance.stage = prov.at("stage").get<std::string>();
  model.provenance.cell = prov.at("cell").get<std::string>();
  model.provenance.backbone = prov.at("backbone").get<std::string>();
  model.provenance.seed = prov.at("seed").get<std::uint64_t>();
  model.provenance.epoch = prov.at("epoch").get<int>();

  std::map<std::string, TensorPtr> by_name;
  while (std::getline(in, line)) {
    if (line == "end") break;
    std::istringstream hs(line);
    std::string kind;
    hs >> kind;
    if (kind == "group") continue;
    if (kind != "tensor") throw std::runtime_error("load_model: unexpected line: " + line);
    std::string name;
    Eigen::Index rows = 0, cols = 0;
    hs >> name >> rows >> cols;
    by_name[name] = make_tensor(name, read_tensor_values(in, rows, cols));
  }

  const auto take = [&](const std::string& name) {
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw std::runtime_error("load_model: missing tensor " + name);
    return it->second;
  };
  model.encoder.tok_emb = take("encoder.tok_emb");
  model.encoder.seg_emb = take("encoder.seg_emb");
  model.encoder.w1 = take("encoder.w1");
  model.encoder.b1 = take("encoder.b1");
  model.encoder.w2 = take("encoder.w2");
  model.encoder.b2 = take("encoder.b2");
  if (by_name.count("typed.w_phi")) {
    TypedHeadParams t;
    t.w_phi = take("typed.w_phi");
    t.b_phi = take("typed.b_phi");
    t.b_t = take("typed.b_t");
    t.log_w = take("typed.log_w");
    t.b_nc = take("typed.b_nc");
    t.log_alpha = take("typed.log_alpha");
    model.typed_head = std::move(t);
  }
  if (by_name.count("fresh.w_cls")) {
    FreshHeadParams f;
    f.w_cls = take("fresh.w_cls");
    f.b_cls = take("fresh.b_cls");
    model.fresh_head = std::move(f);
  }
  if (by_name.count("c2.w_c2")) {
    BaselineHeadParams b;
    b.w_c2 = take("c2.w_c2");
    b.b_c2 = take("c2.b_c2");
    model.baseline_head = std::move(b);
  }
  return model;
}

// ---------------------------------------------------------------------------
// Training loops
// ---------------------------------------------------------------------------

namespace {

long steps_per_epoch(std::size_t n, int batch) {
  return static_cast<long>((n + static_cast<std::size_t>(batch) - 1) /
                           static_cast<std::size_t>(batch));
}

void check_finite_loss(double v, long step) {
  if (!std::isfinite(v))
    throw TrainingFailure("non-finite loss at step " + std::to_string(step));
}

/// Endless pass over a fixed item set; reshuffles from its own stream
/// whenever the current pass is exhausted.
class CyclingOrder {
 public:
  CyclingOrder(std::size_t n, Xoshiro256ss rng) : rng_(rng), order_(n) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    rng_.shuffle(order_);
  }

  std::size_t next() {
    if (pos_ == order_.size()) {
      rng_.shuffle(order_);
      pos_ = 0;
    }
    return order_[pos_++];
  }

 private:
  Xoshiro256ss rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

std::array<long, kNumClasses> count_labels(std::span<const Record> records) {
  std::array<long, kNumClasses> counts{};
  for (const Record& r : records) ++counts[static_cast<std::size_t>(r.label)];
  return counts;
}

struct PairCache {
  std::vector<TokenSequence> pair;  // joint (A,B) sequences
};

PairCache build_pair_cache(std::span<const Record> records,
                           const EncoderConfig& cfg) {
  PairCache c;
  c.pair.reserve(records.size());
  for (const Record& r : records)
    c.pair.push_back(build_pair_sequence(tokenize(r.superior_text, cfg.vocab),
                                         tokenize(r.subordinate_text, cfg.vocab),
                                         cfg.max_len));
  return c;
}

struct DualCache {
  std::vector<TokenSequence> a;
  std::vector<TokenSequence> b;
};

DualCache build_dual_cache(std::span<const Record> records,
                           const EncoderConfig& cfg) {
  DualCache c;
  c.a.reserve(records.size());
  c.b.reserve(records.size());
  for (const Record& r : records) {
    c.a.push_back(build_single_sequence(tokenize(r.superior_text, cfg.vocab), cfg.max_len));
    c.b.push_back(build_single_sequence(tokenize(r.subordinate_text, cfg.vocab), cfg.max_len));
  }
  return c;
}

int argmax_lowest(const Matrix& logits) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(logits.rows()); ++i)
    if (logits(i, 0) > logits(best, 0)) best = i;
  return best;
}

int predict_record(const Model& model, const TokenSequence& pair) {
  Tape tape;
  Var h = encode(tape, pair, model.encoder, model.config, false, nullptr);
  Var logits = fresh_head_logits(tape, h, *model.fresh_head, model.config.dropout,
                                 false, nullptr);
  return argmax_lowest(tape.value(logits));
}

int predict_record_c2(const Model& model, const TokenSequence& a,
                      const TokenSequence& b) {
  Tape tape;
  Var ha = encode(tape, a, model.encoder, model.config, false, nullptr);
  Var hb = encode(tape, b, model.encoder, model.config, false, nullptr);
  Var logits = c2_logits(tape, ha, hb, *model.baseline_head, model.config.dropout,
                         false, nullptr);
  return argmax_lowest(tape.value(logits));
}

double eval_macro_f1(const Model& model, std::span<const Record> records,
                     const PairCache* pairs, const DualCache* duals) {
  std::vector<int> gold, pred;
  gold.reserve(records.size());
  pred.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    gold.push_back(records[i].label);
    pred.push_back(pairs ? predict_record(model, pairs->pair[i])
                         : predict_record_c2(model, duals->a[i], duals->b[i]));
  }
  return macro_f1(gold, pred);
}

/// Builds the CSIP loss contribution of one triplet on the tape.
CsipBatchItem triplet_scores(Tape& tape, const CsipTriplet& t, const Model& model,
                             const Hyperparameters& hp, bool train,
                             Xoshiro256ss* drop) {
  CsipBatchItem item;
  Var hb = encode(tape, t.pair_b, model.encoder, model.config, train, drop);
  item.s_b = factor_scores(tape, hb, *model.typed_head, hp.dropout, train, drop);
  if (t.is_conflict()) {
    Var hg = encode(tape, *t.pair_g, model.encoder, model.config, train, drop);
    item.s_g = factor_scores(tape, hg, *model.typed_head, hp.dropout, train, drop);
    item.target = t.target;
  }
  return item;
}

}  // namespace

Model stage1_pretrain(std::span<const CsipTriplet> triplets,
                      const EncoderConfig& cfg, const Hyperparameters& hp,
                      std::uint64_t seed) {
  if (triplets.empty())
    throw std::invalid_argument("stage1_pretrain: empty triplet set");

  Xoshiro256ss init_rng(seed, stream::kInit);
  Model model;
  model.config = cfg;
  model.encoder = EncoderParams::init(cfg, init_rng);
  model.typed_head = TypedHeadParams::init(cfg.hidden, init_rng);
  model.provenance = {"stage1", "", cfg.name, seed, 0};

  AdamW opt(model.tensors(), hp.weight_decay);
  Xoshiro256ss shuffle_rng(seed, stream::kShuffle);
  Xoshiro256ss dropout_rng(seed, stream::kDropout);

  const long total_steps = hp.stage1_epochs * steps_per_epoch(triplets.size(), hp.stage1_batch);
  long step = 0;
  std::vector<std::size_t> order(triplets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= hp.stage1_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(hp.stage1_batch)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(hp.stage1_batch));
      Tape tape;
      std::vector<CsipBatchItem> items;
      items.reserve(stop - start);
      for (std::size_t k = start; k < stop; ++k)
        items.push_back(
            triplet_scores(tape, triplets[order[k]], model, hp, true, &dropout_rng));
      Var loss = csip_batch_loss(tape, items, hp.lambda_select);
      check_finite_loss(tape.scalar(loss), step);
      tape.backward(loss);
      clip_global_norm(opt.params(), hp.clip_norm);
      opt.step(lr_at(step, total_steps, hp.warmup_ratio, hp.lr));
      opt.zero_grad();
      ++step;
    }
    model.provenance.epoch = epoch;
  }
  return model;
}

namespace {

/// Shared stage-2 loop; the replay loader is present only for the
/// anti-forget variant.
FinetuneResult finetune_loop(Model model, std::span<const Record> train,
                             std::span<const Record> val,
                             std::span<const CsipTriplet> replay_triplets,
                             bool use_replay, const Hyperparameters& hp,
                             std::uint64_t seed) {
  AdamW opt(model.tensors(), hp.weight_decay);
  Xoshiro256ss shuffle_rng(seed, stream::kShuffle);
  Xoshiro256ss dropout_rng(seed, stream::kDropout);

  const ClassWeights weights = class_weights(count_labels(train));
  const PairCache train_pairs = build_pair_cache(train, model.config);
  const PairCache val_pairs = build_pair_cache(val, model.config);

  // Replay batches ride along with fine-tuning steps; the schedule is
  // driven by fine-tuning batches only.
  const bool replay_active = use_replay && hp.lambda_remain != 0.0 &&
                             !replay_triplets.empty();
  std::optional<CyclingOrder> replay_order;
  if (replay_active)
    replay_order.emplace(replay_triplets.size(),
                         Xoshiro256ss(seed, stream::kReplayShuffle));

  const long total_steps = hp.stage2_epochs * steps_per_epoch(train.size(), hp.ft_batch);
  long step = 0;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  FinetuneResult result;
  std::vector<Model> snapshots;

  for (int epoch = 1; epoch <= hp.stage2_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(hp.ft_batch)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(hp.ft_batch));
      Tape tape;
      std::vector<LabeledLogits> batch;
      batch.reserve(stop - start);
      for (std::size_t k = start; k < stop; ++k) {
        const Record& r = train[order[k]];
        Var h = encode(tape, train_pairs.pair[order[k]], model.encoder,
                       model.config, true, &dropout_rng);
        Var logits = fresh_head_logits(tape, h, *model.fresh_head, hp.dropout,
                                       true, &dropout_rng);
        batch.push_back({logits, r.label});
      }
      Var loss = weighted_ce_batch(tape, batch, weights);
      if (replay_active) {
        std::vector<CsipBatchItem> replay;
        replay.reserve(static_cast<std::size_t>(hp.replay_batch));
        for (int k = 0; k < hp.replay_batch; ++k)
          replay.push_back(triplet_scores(tape, replay_triplets[replay_order->next()],
                                          model, hp, true, &dropout_rng));
        Var replay_loss = csip_batch_loss(tape, replay, hp.lambda_select);
        loss = v2_loss(loss, replay_loss, hp.lambda_remain);
      }
      check_finite_loss(tape.scalar(loss), step);
      tape.backward(loss);
      clip_global_norm(opt.params(), hp.clip_norm);
      opt.step(lr_at(step, total_steps, hp.warmup_ratio, hp.lr));
      opt.zero_grad();
      ++step;
    }

    result.val_macro_f1.push_back(eval_macro_f1(model, val, &val_pairs, nullptr));
    snapshots.push_back(model.clone());
  }

  if (snapshots.empty()) {
    result.model = std::move(model);
    return result;
  }
  result.best_epoch = best_epoch(result.val_macro_f1);
  result.model = std::move(snapshots[static_cast<std::size_t>(result.best_epoch - 1)]);
  result.model.provenance.epoch = result.best_epoch;
  return result;
}

}  // namespace

FinetuneResult stage2_v1(const Model& checkpoint, std::span<const Record> train,
                         std::span<const Record> val, const Hyperparameters& hp,
                         std::uint64_t seed) {
  Xoshiro256ss init_rng(seed, stream::kInit);
  Model model;
  model.config = checkpoint.config;
  model.encoder = checkpoint.encoder.clone();
  model.fresh_head = FreshHeadParams::init(model.config.hidden, init_rng);
  model.provenance = {"v1", "v1", model.config.name, seed, 0};
  return finetune_loop(std::move(model), train, val, {}, false, hp, seed);
}

FinetuneResult stage2_v2(const Model& checkpoint, std::span<const Record> train,
                         std::span<const CsipTriplet> replay_triplets,
                         std::span<const Record> val, const Hyperparameters& hp,
                         std::uint64_t seed) {
  if (!checkpoint.typed_head)
    throw std::invalid_argument("stage2_v2: checkpoint lacks the typed-head group");
  Xoshiro256ss init_rng(seed, stream::kInit);
  Model model = checkpoint.clone();
  model.fresh_head = FreshHeadParams::init(model.config.hidden, init_rng);
  model.provenance = {"v2", "v2", model.config.name, seed, 0};
  return finetune_loop(std::move(model), train, val, replay_triplets, true, hp, seed);
}

FinetuneResult train_baseline_c2(std::span<const Record> train,
                                 std::span<const Record> val,
                                 const EncoderConfig& cfg,
                                 const Hyperparameters& hp, std::uint64_t seed) {
  Xoshiro256ss init_rng(seed, stream::kInit);
  Model model;
  model.config = cfg;
  model.encoder = EncoderParams::init(cfg, init_rng);
  model.baseline_head = BaselineHeadParams::init(cfg.hidden, init_rng);
  model.provenance = {"c2", "c2", cfg.name, seed, 0};

  AdamW opt(model.tensors(), hp.weight_decay);
  Xoshiro256ss shuffle_rng(seed, stream::kShuffle);
  Xoshiro256ss dropout_rng(seed, stream::kDropout);

  const ClassWeights weights = class_weights(count_labels(train));
  const DualCache train_duals = build_dual_cache(train, cfg);
  const DualCache val_duals = build_dual_cache(val, cfg);

  const long total_steps = hp.stage2_epochs * steps_per_epoch(train.size(), hp.ft_batch);
  long step = 0;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  FinetuneResult result;
  std::vector<Model> snapshots;

  for (int epoch = 1; epoch <= hp.stage2_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(hp.ft_batch)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(hp.ft_batch));
      Tape tape;
      std::vector<LabeledLogits> batch;
      batch.reserve(stop - start);
      for (std::size_t k = start; k < stop; ++k) {
        const Record& r = train[order[k]];
        Var ha = encode(tape, train_duals.a[order[k]], model.encoder, cfg, true,
                        &dropout_rng);
        Var hb = encode(tape, train_duals.b[order[k]], model.encoder, cfg, true,
                        &dropout_rng);
        Var logits = c2_logits(tape, ha, hb, *model.baseline_head, hp.dropout,
                               true, &dropout_rng);
        batch.push_back({logits, r.label});
      }
      Var loss = weighted_ce_batch(tape, batch, weights);
      check_finite_loss(tape.scalar(loss), step);
      tape.backward(loss);
      clip_global_norm(opt.params(), hp.clip_norm);
      opt.step(lr_at(step, total_steps, hp.warmup_ratio, hp.lr));
      opt.zero_grad();
      ++step;
    }

    result.val_macro_f1.push_back(eval_macro_f1(model, val, nullptr, &val_duals));
    snapshots.push_back(model.clone());
  }

  if (snapshots.empty()) {
    result.model = std::move(model);
    return result;
  }
  result.best_epoch = best_epoch(result.val_macro_f1);
  result.model = std::move(snapshots[static_cast<std::size_t>(result.best_epoch - 1)]);
  result.model.provenance.epoch = result.best_epoch;
  return result;
}

std::vector<PredictionRow> predict_test(const Model& model,
                                        std::span<const Record> test) {
  std::vector<PredictionRow> rows;
  rows.reserve(test.size());
  if (model.fresh_head) {
    const PairCache pairs = build_pair_cache(test, model.config);
    for (std::size_t i = 0; i < test.size(); ++i)
      rows.push_back({test[i].id, test[i].label, predict_record(model, pairs.pair[i])});
    return rows;
  }
  if (model.baseline_head) {
    const DualCache duals = build_dual_cache(test, model.config);
    for (std::size_t i = 0; i < test.size(); ++i)
      rows.push_back(
          {test[i].id, test[i].label, predict_record_c2(model, duals.a[i], duals.b[i])});
    return rows;
  }
  throw std::invalid_argument("predict_test: model has no classification head");
}

}  // namespace csip
