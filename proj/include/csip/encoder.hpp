#pragma once

#include "csip/autodiff.hpp"
#include "csip/numerics.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace csip {

struct EncoderConfig {
  int vocab = 8192;
  int hidden = 32;  // d
  int max_len = 64;
  double dropout = 0.1;
  std::string name = "toy";

  static constexpr int kClsId = 0;
  static constexpr int kSepId = 1;
  static constexpr int kNumSpecial = 2;
};

/// Hashing tokenizer: one token per Unicode codepoint,
/// id = mix64(codepoint) mod (vocab - n_special) + n_special.
/// Bytes that do not form a valid UTF-8 sequence are consumed one at a
/// time as their raw value.
std::vector<int> tokenize(std::string_view text, int vocab);

/// [CLS] + segment-0 tokens (+ [SEP]) followed by optional segment-1
/// tokens + [SEP]. Pair sequences carry exactly two separators.
struct TokenSequence {
  std::vector<int> ids;
  std::vector<int> segments;

  std::size_t size() const { return ids.size(); }
};

/// Longest-first truncation to max_len, then [CLS] a [SEP] b [SEP].
/// While over budget the last token of the currently longer segment is
/// dropped; ties drop from b.
TokenSequence build_pair_sequence(std::span<const int> a_ids,
                                  std::span<const int> b_ids, int max_len);

/// [CLS] a [SEP] with tail truncation; used by the dual-encoding baseline.
TokenSequence build_single_sequence(std::span<const int> ids, int max_len);

/// Mean-pooled token+segment embeddings through a two-layer MLP with a
/// sigmoid between the affine maps; dropout sits after the nonlinearity
/// and is active only in train mode.
struct EncoderParams {
  TensorPtr tok_emb;  // vocab x d
  TensorPtr seg_emb;  // 2 x d
  TensorPtr w1, b1;   // d x d, d
  TensorPtr w2, b2;   // d x d, d

  static EncoderParams init(const EncoderConfig& cfg, Xoshiro256ss& rng);

  ParamGroup group() const {
    return {GroupTag::kEncoder, {tok_emb, seg_emb, w1, b1, w2, b2}};
  }

  EncoderParams clone() const;
};

Var encode(Tape& tape, const TokenSequence& seq, const EncoderParams& params,
           const EncoderConfig& cfg, bool train_mode, Xoshiro256ss* dropout_rng);

}  // namespace csip
