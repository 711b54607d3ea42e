#pragma once

#include "csip/data.hpp"
#include "csip/encoder.hpp"
#include "csip/heads.hpp"
#include "csip/losses.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace csip {

/// Raised when a run produces a non-finite loss; the orchestrator treats
/// this as a training failure and substitutes a backup seed.
struct TrainingFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Hyperparameters {
  double lr = 2e-5;
  double weight_decay = 0.01;
  double warmup_ratio = 0.1;
  double clip_norm = 1.0;
  double dropout = 0.1;
  double lambda_select = 1.0;
  double lambda_remain = 0.5;
  int stage1_epochs = 3;
  int stage1_batch = 32;
  int stage2_epochs = 5;
  int ft_batch = 16;
  int replay_batch = 8;

  /// Toy-encoder preset: the full-scale learning rate is far too small
  /// for the desk model.
  static Hyperparameters desk() {
    Hyperparameters hp;
    hp.lr = 1e-2;
    return hp;
  }
};

/// Linear warmup over the first ceil(ratio * total) steps, then linear
/// decay to zero at total.
double lr_at(long step, long total_steps, double warmup_ratio, double base_lr);

/// 1-based index of the best validation score; ties go to the earliest
/// epoch.
int best_epoch(const std::vector<double>& scores);

/// AdamW with decoupled weight decay, beta = (0.9, 0.999), eps = 1e-8.
/// Parameters that received no gradient in a step are skipped entirely
/// (no moment update, no decay), matching the convention of optimizers
/// that skip grad-less parameters.
class AdamW {
 public:
  AdamW(std::vector<TensorPtr> params, double weight_decay);

  void step(double lr);
  void zero_grad();

  const std::vector<TensorPtr>& params() const { return params_; }

 private:
  struct Slot {
    Matrix m;
    Matrix v;
    long t = 0;
  };
  std::vector<TensorPtr> params_;
  std::vector<Slot> slots_;
  double weight_decay_;
};

struct Provenance {
  std::string stage;     // "init" | "stage1" | "v1" | "v2" | "c2"
  std::string cell;      // "", "c2", "v1", "v2"
  std::string backbone;  // encoder config name
  std::uint64_t seed = 0;
  int epoch = 0;
};

/// A trained (or initial) parameter bundle: the encoder plus whichever
/// heads the stage carries, with provenance. Restoring from disk
/// reproduces forward outputs bitwise.
struct Model {
  EncoderConfig config;
  EncoderParams encoder;
  std::optional<TypedHeadParams> typed_head;
  std::optional<FreshHeadParams> fresh_head;
  std::optional<BaselineHeadParams> baseline_head;
  Provenance provenance;

  std::vector<ParamGroup> groups() const;
  std::vector<TensorPtr> tensors() const;
  Model clone() const;
};

void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

/// Typed pretraining: mixed conflict/no-conflict batches, per-epoch
/// shuffling, AdamW with clipping and the linear schedule. Returns the
/// encoder plus the typed-head parameter group.
Model stage1_pretrain(std::span<const CsipTriplet> triplets,
                      const EncoderConfig& cfg, const Hyperparameters& hp,
                      std::uint64_t seed);

struct FinetuneResult {
  Model model;
  int best_epoch = 0;                // 1-based
  std::vector<double> val_macro_f1;  // one entry per epoch
};

/// Typed-discard transfer: drops the typed-head group, trains a fresh
/// five-way head with class-weighted cross-entropy, returns the
/// best-validation-epoch model (ties to the earliest epoch).
FinetuneResult stage2_v1(const Model& checkpoint, std::span<const Record> train,
                         std::span<const Record> val, const Hyperparameters& hp,
                         std::uint64_t seed);

/// Anti-forget replay transfer: retains the typed-head group as a live
/// parameter group and interleaves a replay batch from an independently
/// shuffled triplet loader with every fine-tuning batch. Inference uses
/// only the fresh head. lambda_remain = 0 disables the replay pass.
FinetuneResult stage2_v2(const Model& checkpoint, std::span<const Record> train,
                         std::span<const CsipTriplet> replay_triplets,
                         std::span<const Record> val, const Hyperparameters& hp,
                         std::uint64_t seed);

/// Concatenated dual-encoding baseline; never reads revision_text.
FinetuneResult train_baseline_c2(std::span<const Record> train,
                                 std::span<const Record> val,
                                 const EncoderConfig& cfg,
                                 const Hyperparameters& hp, std::uint64_t seed);

struct PredictionRow {
  std::string id;
  int gold = 0;
  int pred = 0;
};

/// Argmax over the model's inference head with dropout off; ties go to
/// the lowest class index; rows stay in test-file order.
std::vector<PredictionRow> predict_test(const Model& model,
                                        std::span<const Record> test);

}  // namespace csip
