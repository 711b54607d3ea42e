#pragma once

#include "csip/autodiff.hpp"
#include "csip/numerics.hpp"

#include <cmath>

namespace csip {

/// Factor index order used everywhere, including ingest:
/// Responsibility = 0, Condition = 1, Sanction = 2, Definition = 3,
/// No-Conflict = 4.
inline constexpr int kNumFactors = 4;
inline constexpr int kNumClasses = 5;
inline constexpr int kNoConflict = 4;

/// logit(0.05): the low-evidence prior each factor score starts from.
inline double low_evidence_logit() { return std::log(0.05 / 0.95); }

/// Four-row factor map plus the monotone-complement parameters. The
/// per-factor weights and the complement pull are exp-parameterized so
/// they stay positive under any update.
struct TypedHeadParams {
  TensorPtr w_phi;      // 4 x d, Xavier gain 0.5
  TensorPtr b_phi;      // 4, logit(0.05)
  TensorPtr b_t;        // 4, zero
  TensorPtr log_w;      // 4, zero (w_t = 1)
  TensorPtr b_nc;       // 1, +0.5
  TensorPtr log_alpha;  // 1, zero (alpha = 1)

  static TypedHeadParams init(int d, Xoshiro256ss& rng) {
    TypedHeadParams p;
    p.w_phi = make_tensor("typed.w_phi", xavier_uniform(kNumFactors, d, 0.5, rng));
    p.b_phi = make_tensor("typed.b_phi",
                          Matrix::Constant(kNumFactors, 1, low_evidence_logit()));
    p.b_t = make_tensor("typed.b_t", Matrix::Zero(kNumFactors, 1));
    p.log_w = make_tensor("typed.log_w", Matrix::Zero(kNumFactors, 1));
    p.b_nc = make_tensor("typed.b_nc", Matrix::Constant(1, 1, 0.5));
    p.log_alpha = make_tensor("typed.log_alpha", Matrix::Zero(1, 1));
    return p;
  }

  ParamGroup group() const {
    return {GroupTag::kTypedHead, {w_phi, b_phi, b_t, log_w, b_nc, log_alpha}};
  }
};

namespace detail {
inline Matrix uniform_column(int n, double bound, Xoshiro256ss& rng) {
  Matrix m(n, 1);
  for (int i = 0; i < n; ++i) m(i, 0) = rng.uniform(-bound, bound);
  return m;
}
}  // namespace detail

struct FreshHeadParams {
  TensorPtr w_cls;  // 5 x d
  TensorPtr b_cls;  // 5, same fan-in bound as the weight

  static FreshHeadParams init(int d, Xoshiro256ss& rng) {
    FreshHeadParams p;
    p.w_cls = make_tensor("fresh.w_cls", fan_in_uniform(kNumClasses, d, rng));
    p.b_cls = make_tensor(
        "fresh.b_cls",
        detail::uniform_column(kNumClasses, 1.0 / std::sqrt(static_cast<double>(d)), rng));
    return p;
  }

  ParamGroup group() const { return {GroupTag::kFreshHead, {w_cls, b_cls}}; }
};

struct BaselineHeadParams {
  TensorPtr w_c2;  // 5 x 2d
  TensorPtr b_c2;  // 5

  static BaselineHeadParams init(int d, Xoshiro256ss& rng) {
    BaselineHeadParams p;
    p.w_c2 = make_tensor("c2.w_c2", fan_in_uniform(kNumClasses, 2 * d, rng));
    p.b_c2 = make_tensor(
        "c2.b_c2",
        detail::uniform_column(kNumClasses,
                               1.0 / std::sqrt(static_cast<double>(2 * d)), rng));
    return p;
  }

  ParamGroup group() const { return {GroupTag::kBaselineHead, {w_c2, b_c2}}; }
};

/// s = W_phi Dropout(h) + b_phi.
inline Var factor_scores(Tape& tape, Var h, const TypedHeadParams& p,
                         double dropout_p, bool train_mode,
                         Xoshiro256ss* dropout_rng) {
  Var hd = h;
  if (train_mode && dropout_p > 0.0) {
    if (dropout_rng == nullptr)
      throw std::invalid_argument("factor_scores: train mode requires a dropout stream");
    hd = dropout(h, dropout_p, *dropout_rng);
  }
  return add(matvec(tape.leaf(p.w_phi), hd), tape.leaf(p.b_phi));
}

/// Five-way logits from per-factor evidence e = sigma(s):
///   l_t  = b_t + exp(log w_t) * e_t
///   l_nc = b_nc - exp(log alpha) * sum_t e_t
/// so any factor firing pushes the no-conflict logit down.
inline Var complement_logits(Tape& tape, Var e, const TypedHeadParams& p) {
  Var lt = add(tape.leaf(p.b_t), mul(vexp(tape.leaf(p.log_w)), e));
  Var lnc = sub(tape.leaf(p.b_nc), mul(vexp(tape.leaf(p.log_alpha)), sum(e)));
  return concat(lt, lnc);
}

inline Var fresh_head_logits(Tape& tape, Var h, const FreshHeadParams& p,
                             double dropout_p, bool train_mode,
                             Xoshiro256ss* dropout_rng) {
  Var hd = h;
  if (train_mode && dropout_p > 0.0) {
    if (dropout_rng == nullptr)
      throw std::invalid_argument("fresh_head_logits: train mode requires a dropout stream");
    hd = dropout(h, dropout_p, *dropout_rng);
  }
  return add(matvec(tape.leaf(p.w_cls), hd), tape.leaf(p.b_cls));
}

/// Affine map of the concatenated pair of single-text encodings.
inline Var c2_logits(Tape& tape, Var h_a, Var h_b, const BaselineHeadParams& p,
                     double dropout_p, bool train_mode, Xoshiro256ss* dropout_rng) {
  Var h = concat(h_a, h_b);
  if (train_mode && dropout_p > 0.0) {
    if (dropout_rng == nullptr)
      throw std::invalid_argument("c2_logits: train mode requires a dropout stream");
    h = dropout(h, dropout_p, *dropout_rng);
  }
  return add(matvec(tape.leaf(p.w_c2), h), tape.leaf(p.b_c2));
}

}  // namespace csip
