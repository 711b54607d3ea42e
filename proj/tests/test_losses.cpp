#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "csip/encoder.hpp"
#include "csip/losses.hpp"

#include <cmath>

using namespace csip;

namespace {

Var vec4(Tape& t, double a, double b, double c, double d) {
  Matrix m(4, 1);
  m << a, b, c, d;
  return t.constant(std::move(m));
}

const double kLn2 = std::log(2.0);

}  // namespace

TEST_CASE("conflict loss at zero scores: 5 ln 2 total") {
  Tape t;
  Var z1 = vec4(t, 0, 0, 0, 0);
  Var z2 = vec4(t, 0, 0, 0, 0);
  const CsipRecordLoss loss = csip_conflict_loss(t, z1, z2, 1, 1.0);
  CHECK(t.scalar(loss.pos) == doctest::Approx(kLn2).epsilon(1e-12));
  CHECK(t.scalar(loss.golden) == doctest::Approx(4 * kLn2).epsilon(1e-12));
  CHECK(t.scalar(loss.select) == 0.0);
  CHECK(t.scalar(loss.total) == doctest::Approx(3.4657).epsilon(1e-4));
}

TEST_CASE("conflict loss on a confident example: softplus tails") {
  Tape t;
  Var sb = vec4(t, 10, -10, -10, -10);
  Var sg = vec4(t, -10, -10, -10, -10);
  const CsipRecordLoss loss = csip_conflict_loss(t, sb, sg, 0, 1.0);
  CHECK(t.scalar(loss.select) == 0.0);  // off-target coordinates agree
  CHECK(t.scalar(loss.total) == doctest::Approx(2.27e-4).epsilon(0.01));
}

TEST_CASE("selectivity is exactly zero when off-target scores agree") {
  Tape t;
  Var sb = vec4(t, 3.0, 1.5, -0.5, 2.0);
  Var sg = vec4(t, -9.0, 1.5, -0.5, 2.0);
  for (int target = 0; target < 1; ++target) {
    const CsipRecordLoss loss = csip_conflict_loss(t, sb, sg, target, 1.0);
    CHECK(t.scalar(loss.select) == 0.0);
  }
}

TEST_CASE("conflict loss validates the target index") {
  Tape t;
  Var z = vec4(t, 0, 0, 0, 0);
  CHECK_THROWS_AS(csip_conflict_loss(t, z, z, 4, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(csip_conflict_loss(t, z, z, -1, 1.0), std::invalid_argument);
}

TEST_CASE("no-conflict loss values") {
  Tape t;
  CHECK(t.scalar(csip_nc_loss(vec4(t, 0, 0, 0, 0))) ==
        doctest::Approx(2.7726).epsilon(1e-4));
  CHECK(t.scalar(csip_nc_loss(vec4(t, -40, -40, -40, -40))) ==
        doctest::Approx(0.0).epsilon(1e-12));
  CHECK(t.scalar(csip_nc_loss(vec4(t, 10, 0, 0, 0))) ==
        doctest::Approx(12.0795).epsilon(1e-4));
}

TEST_CASE("batch loss is the mean of per-record totals") {
  Tape t;
  std::vector<CsipBatchItem> batch;
  batch.push_back({vec4(t, 0, 0, 0, 0), std::nullopt, -1});
  CHECK(t.scalar(csip_batch_loss(t, batch, 1.0)) ==
        doctest::Approx(2.7726).epsilon(1e-4));

  CsipBatchItem conflict{vec4(t, 0, 0, 0, 0), vec4(t, 0, 0, 0, 0), 2};
  batch.push_back(conflict);
  CHECK(t.scalar(csip_batch_loss(t, batch, 1.0)) ==
        doctest::Approx(3.1192).epsilon(1e-4));

  // Duplicating every record leaves the mean unchanged.
  auto doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());
  CHECK(t.scalar(csip_batch_loss(t, doubled, 1.0)) ==
        doctest::Approx(t.scalar(csip_batch_loss(t, batch, 1.0))).epsilon(1e-12));

  std::vector<CsipBatchItem> empty;
  CHECK_THROWS_AS(csip_batch_loss(t, empty, 1.0), std::invalid_argument);
}

TEST_CASE("all loss components are non-negative on random inputs") {
  Xoshiro256ss rng(21);
  Tape t;
  for (int trial = 0; trial < 200; ++trial) {
    Var sb = vec4(t, rng.uniform(-8, 8), rng.uniform(-8, 8), rng.uniform(-8, 8),
                  rng.uniform(-8, 8));
    Var sg = vec4(t, rng.uniform(-8, 8), rng.uniform(-8, 8), rng.uniform(-8, 8),
                  rng.uniform(-8, 8));
    const auto loss =
        csip_conflict_loss(t, sb, sg, static_cast<int>(rng.below(4)), 1.0);
    CHECK(t.scalar(loss.pos) >= 0.0);
    CHECK(t.scalar(loss.golden) >= 0.0);
    CHECK(t.scalar(loss.select) >= 0.0);
    CHECK(t.scalar(csip_nc_loss(sb)) >= 0.0);
  }
}

TEST_CASE("class weights: inverse frequency with unit normalization") {
  const ClassWeights w = class_weights({1617, 1152, 935, 333, 791});
  CHECK(w[3] == doctest::Approx(2.900).epsilon(1e-3));

  const ClassWeights uniform = class_weights({10, 10, 10, 10, 10});
  for (int c = 0; c < kNumClasses; ++c) CHECK(uniform[c] == doctest::Approx(1.0));

  const ClassWeights doubled = class_weights({3234, 2304, 1870, 666, 1582});
  for (int c = 0; c < kNumClasses; ++c)
    CHECK(doubled[c] == doctest::Approx(w[c]).epsilon(1e-12));

  CHECK_THROWS_AS(class_weights({1, 1, 0, 1, 1}), std::invalid_argument);
}

TEST_CASE("weighted cross-entropy values") {
  Tape t;
  Var uniform = t.constant(Matrix::Zero(kNumClasses, 1));
  ClassWeights unit;
  unit.w = {1, 1, 1, 1, 1};
  CHECK(t.scalar(weighted_ce(uniform, 2, unit)) ==
        doctest::Approx(std::log(5.0)).epsilon(1e-12));

  Matrix confident = Matrix::Zero(kNumClasses, 1);
  confident(3, 0) = 20.0;
  CHECK(t.scalar(weighted_ce(t.constant(confident), 3, unit)) ==
        doctest::Approx(0.0).epsilon(1e-6));

  ClassWeights heavy = unit;
  heavy.w[1] = 2.9;
  CHECK(t.scalar(weighted_ce(uniform, 1, heavy)) ==
        doctest::Approx(4.6673).epsilon(1e-4));

  CHECK_THROWS_AS(weighted_ce(uniform, 5, unit), std::invalid_argument);
}

TEST_CASE("weighted batch reduction divides by the weight sum") {
  Tape t;
  ClassWeights w;
  w.w = {2.0, 1.0, 1.0, 1.0, 1.0};
  std::vector<LabeledLogits> batch = {
      {t.constant(Matrix::Zero(kNumClasses, 1)), 0},
      {t.constant(Matrix::Zero(kNumClasses, 1)), 1},
  };
  // (2 ln5 + 1 ln5) / 3
  CHECK(t.scalar(weighted_ce_batch(t, batch, w)) ==
        doctest::Approx(std::log(5.0)).epsilon(1e-12));
}

TEST_CASE("v2 combined loss") {
  CHECK(v2_loss_value(1.0, 2.0, 0.5) == 2.0);
  CHECK(v2_loss_value(1.7, 99.0, 0.0) == 1.7);
  CHECK(v2_loss_value(1.6094, 3.4657, 0.5) == doctest::Approx(3.3423).epsilon(1e-4));
  Tape t;
  Var combined = v2_loss(t.constant_scalar(1.6094), t.constant_scalar(3.4657), 0.5);
  CHECK(t.scalar(combined) == doctest::Approx(3.3423).epsilon(1e-4));
}

TEST_CASE("grad_check: csip losses at 1e-4 on random draws") {
  for (std::uint64_t draw = 1; draw <= 5; ++draw) {
    Xoshiro256ss rng(draw);
    auto sb = make_tensor("sb", xavier_uniform(4, 1, 2.0, rng));
    auto sg = make_tensor("sg", xavier_uniform(4, 1, 2.0, rng));
    const TensorPtr params[] = {sb, sg};
    const double err = grad_check(
        [&](Tape& t) {
          std::vector<CsipBatchItem> batch;
          batch.push_back({t.leaf(sb), t.leaf(sg), static_cast<int>(draw % 4)});
          batch.push_back({t.leaf(sg), std::nullopt, -1});
          return csip_batch_loss(t, batch, 1.0);
        },
        params, 1e-3);
    CHECK(err <= 1e-4);
  }
}

TEST_CASE("batch loss feeds the encoder through both pair encodings") {
  EncoderConfig cfg;
  cfg.vocab = 64;
  cfg.hidden = 8;
  cfg.max_len = 16;
  Xoshiro256ss rng(41, stream::kInit);
  const EncoderParams enc = EncoderParams::init(cfg, rng);
  const TypedHeadParams typed = TypedHeadParams::init(cfg.hidden, rng);
  const TokenSequence pair_b = build_pair_sequence(std::vector<int>{3, 4},
                                                   std::vector<int>{5, 6}, cfg.max_len);
  const TokenSequence pair_g = build_pair_sequence(std::vector<int>{3, 4},
                                                   std::vector<int>{7}, cfg.max_len);
  const auto group = enc.group();

  const auto encoder_grad_from = [&](bool use_pos_only) {
    for (const auto& t : group.tensors) t->zero_grad();
    Tape tape;
    Var sb = factor_scores(tape, encode(tape, pair_b, enc, cfg, false, nullptr),
                           typed, 0.0, false, nullptr);
    Var sg = factor_scores(tape, encode(tape, pair_g, enc, cfg, false, nullptr),
                           typed, 0.0, false, nullptr);
    const CsipRecordLoss loss = csip_conflict_loss(tape, sb, sg, 1, 1.0);
    tape.backward(use_pos_only ? loss.pos : loss.golden);
    double total = 0.0;
    for (const auto& t : group.tensors) total += t->grad.cwiseAbs().sum();
    return total;
  };
  // The (A,B) path alone and the (A, revision) path alone each reach the
  // encoder parameters.
  CHECK(encoder_grad_from(true) > 0.0);
  CHECK(encoder_grad_from(false) > 0.0);
}
