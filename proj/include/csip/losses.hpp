#pragma once

#include "csip/autodiff.hpp"
#include "csip/heads.hpp"

#include <array>
#include <optional>
#include <span>
#include <stdexcept>

namespace csip {

/// The three conflict-record terms and their weighted total.
struct CsipRecordLoss {
  Var pos;
  Var golden;
  Var select;
  Var total;
};

/// Conflict-record loss over the raw factor scores of the (A,B) pair and
/// its revised counterpart:
///   pos    = bce(s_b[t], 1)            only the true factor must fire on B
///   golden = sum_t' bce(s_g[t'], 0)    all factors silent on the revision
///   select = sum_{t' != t} (s_b - s_g)^2   off-target scores must not move
inline CsipRecordLoss csip_conflict_loss(Tape& tape, Var s_b, Var s_g,
                                         int target_factor, double lambda_select) {
  if (target_factor < 0 || target_factor >= kNumFactors)
    throw std::invalid_argument("csip_conflict_loss: target factor out of range");
  CsipRecordLoss out;
  out.pos = bce_with_logits(pick(s_b, target_factor), 1.0);
  out.golden = sum(bce_with_logits(s_g, 0.0));
  Matrix m = Matrix::Ones(kNumFactors, 1);
  m(target_factor, 0) = 0.0;
  Var mask = tape.constant(std::move(m));
  out.select = sum(mul(square(sub(s_b, s_g)), mask));
  out.total = add(add(out.pos, out.golden), scale(out.select, lambda_select));
  return out;
}

/// No-conflict record loss: every factor silent on the pair itself.
inline Var csip_nc_loss(Var s) { return sum(bce_with_logits(s, 0.0)); }

/// One record of a mixed pretraining batch: conflict records carry both
/// score vectors and a target factor, no-conflict records only s_b.
struct CsipBatchItem {
  Var s_b;
  std::optional<Var> s_g;
  int target = -1;
};

/// Arithmetic mean of the per-record totals over a mixed batch.
inline Var csip_batch_loss(Tape& tape, std::span<const CsipBatchItem> items,
                           double lambda_select) {
  if (items.empty()) throw std::invalid_argument("csip_batch_loss: empty batch");
  std::optional<Var> acc;
  for (const auto& it : items) {
    Var rec = it.s_g.has_value()
                  ? csip_conflict_loss(tape, it.s_b, *it.s_g, it.target,
                                       lambda_select)
                        .total
                  : csip_nc_loss(it.s_b);
    acc = acc.has_value() ? add(*acc, rec) : rec;
  }
  return scale(*acc, 1.0 / static_cast<double>(items.size()));
}

/// Inverse-frequency class weights, normalized so uniform counts give
/// unit weights: w_c = N / (K * n_c).
struct ClassWeights {
  std::array<double, kNumClasses> w{};

  double operator[](int c) const { return w[static_cast<std::size_t>(c)]; }
};

inline ClassWeights class_weights(const std::array<long, kNumClasses>& counts) {
  long total = 0;
  for (long c : counts) {
    if (c <= 0) throw std::invalid_argument("class_weights: non-positive count");
    total += c;
  }
  ClassWeights out;
  for (int c = 0; c < kNumClasses; ++c)
    out.w[static_cast<std::size_t>(c)] =
        static_cast<double>(total) /
        (static_cast<double>(kNumClasses) * static_cast<double>(counts[static_cast<std::size_t>(c)]));
  return out;
}

/// w_gold * cross-entropy for a single record.
inline Var weighted_ce(Var logits, int gold, const ClassWeights& weights) {
  if (gold < 0 || gold >= kNumClasses)
    throw std::invalid_argument("weighted_ce: label out of range");
  return scale(softmax_cross_entropy(logits, gold), weights[gold]);
}

/// Weight-normalized batch reduction: sum of weighted losses divided by
/// the sum of the batch members' weights.
struct LabeledLogits {
  Var logits;
  int gold;
};

inline Var weighted_ce_batch(Tape&, std::span<const LabeledLogits> batch,
                             const ClassWeights& weights) {
  if (batch.empty()) throw std::invalid_argument("weighted_ce_batch: empty batch");
  std::optional<Var> acc;
  double weight_sum = 0.0;
  for (const auto& item : batch) {
    Var rec = weighted_ce(item.logits, item.gold, weights);
    weight_sum += weights[item.gold];
    acc = acc.has_value() ? add(*acc, rec) : rec;
  }
  return scale(*acc, 1.0 / weight_sum);
}

/// Fine-tuning loss with the replay term: ce + lambda_remain * replay.
inline Var v2_loss(Var ce_term, Var replay_term, double lambda_remain) {
  return add(ce_term, scale(replay_term, lambda_remain));
}

inline double v2_loss_value(double ce_term, double replay_term, double lambda_remain) {
  return ce_term + lambda_remain * replay_term;
}

}  // namespace csip
