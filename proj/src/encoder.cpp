#include "csip/encoder.hpp"

#include <stdexcept>

namespace csip {

namespace {

// Decodes the next UTF-8 codepoint starting at i; on malformed input the
// single byte is returned as-is.
std::uint32_t next_codepoint(std::string_view s, std::size_t& i) {
  const auto byte = [&](std::size_t k) {
    return static_cast<std::uint8_t>(s[k]);
  };
  const std::uint8_t b0 = byte(i);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len = 0;
  std::uint32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return b0;
  }
  if (i + static_cast<std::size_t>(len) > s.size()) {
    ++i;
    return b0;
  }
  for (int k = 1; k < len; ++k) {
    const std::uint8_t bk = byte(i + static_cast<std::size_t>(k));
    if ((bk & 0xC0) != 0x80) {
      ++i;
      return b0;
    }
    cp = (cp << 6) | (bk & 0x3F);
  }
  i += static_cast<std::size_t>(len);
  return cp;
}

}  // namespace

std::vector<int> tokenize(std::string_view text, int vocab) {
  const int content = vocab - EncoderConfig::kNumSpecial;
  if (content < 1) throw std::invalid_argument("tokenize: vocab too small");
  std::vector<int> ids;
  ids.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const std::uint32_t cp = next_codepoint(text, i);
    const std::uint64_t h = mix64(cp);
    ids.push_back(static_cast<int>(h % static_cast<std::uint64_t>(content)) +
                  EncoderConfig::kNumSpecial);
  }
  return ids;
}

TokenSequence build_pair_sequence(std::span<const int> a_ids,
                                  std::span<const int> b_ids, int max_len) {
  if (max_len < 8) throw std::invalid_argument("build_pair_sequence: max_len < 8");
  std::size_t na = a_ids.size();
  std::size_t nb = b_ids.size();
  const std::size_t budget = static_cast<std::size_t>(max_len);
  while (3 + na + nb > budget) {
    if (na > nb)
      --na;
    else
      --nb;
  }
  TokenSequence seq;
  seq.ids.reserve(3 + na + nb);
  seq.segments.reserve(3 + na + nb);
  seq.ids.push_back(EncoderConfig::kClsId);
  seq.segments.push_back(0);
  for (std::size_t i = 0; i < na; ++i) {
    seq.ids.push_back(a_ids[i]);
    seq.segments.push_back(0);
  }
  seq.ids.push_back(EncoderConfig::kSepId);
  seq.segments.push_back(0);
  for (std::size_t i = 0; i < nb; ++i) {
    seq.ids.push_back(b_ids[i]);
    seq.segments.push_back(1);
  }
  seq.ids.push_back(EncoderConfig::kSepId);
  seq.segments.push_back(1);
  return seq;
}

TokenSequence build_single_sequence(std::span<const int> ids, int max_len) {
  if (max_len < 8) throw std::invalid_argument("build_single_sequence: max_len < 8");
  std::size_t n = ids.size();
  const std::size_t budget = static_cast<std::size_t>(max_len) - 2;
  if (n > budget) n = budget;
  TokenSequence seq;
  seq.ids.reserve(2 + n);
  seq.segments.reserve(2 + n);
  seq.ids.push_back(EncoderConfig::kClsId);
  seq.segments.push_back(0);
  for (std::size_t i = 0; i < n; ++i) {
    seq.ids.push_back(ids[i]);
    seq.segments.push_back(0);
  }
  seq.ids.push_back(EncoderConfig::kSepId);
  seq.segments.push_back(0);
  return seq;
}

EncoderParams EncoderParams::init(const EncoderConfig& cfg, Xoshiro256ss& rng) {
  if (cfg.hidden < 1) throw std::invalid_argument("encoder hidden size < 1");
  const int d = cfg.hidden;
  EncoderParams p;
  p.tok_emb = make_tensor("encoder.tok_emb", xavier_uniform(cfg.vocab, d, 1.0, rng));
  p.seg_emb = make_tensor("encoder.seg_emb", xavier_uniform(2, d, 1.0, rng));
  p.w1 = make_tensor("encoder.w1", xavier_uniform(d, d, 1.0, rng));
  p.b1 = make_tensor("encoder.b1", Matrix::Zero(d, 1));
  p.w2 = make_tensor("encoder.w2", xavier_uniform(d, d, 1.0, rng));
  p.b2 = make_tensor("encoder.b2", Matrix::Zero(d, 1));
  return p;
}

EncoderParams EncoderParams::clone() const {
  EncoderParams p;
  p.tok_emb = make_tensor(tok_emb->name, tok_emb->value);
  p.seg_emb = make_tensor(seg_emb->name, seg_emb->value);
  p.w1 = make_tensor(w1->name, w1->value);
  p.b1 = make_tensor(b1->name, b1->value);
  p.w2 = make_tensor(w2->name, w2->value);
  p.b2 = make_tensor(b2->name, b2->value);
  return p;
}

Var encode(Tape& tape, const TokenSequence& seq, const EncoderParams& params,
           const EncoderConfig& cfg, bool train_mode, Xoshiro256ss* dropout_rng) {
  if (seq.ids.empty()) throw std::invalid_argument("encode: empty sequence");
  for (int id : seq.ids)
    if (id < 0 || id >= cfg.vocab)
      throw std::invalid_argument("encode: token id outside vocabulary");

  Var tok = rows_mean(tape.leaf(params.tok_emb), seq.ids);
  Var seg = rows_mean(tape.leaf(params.seg_emb), seq.segments);
  Var x = add(tok, seg);
  Var z1 = add(matvec(tape.leaf(params.w1), x), tape.leaf(params.b1));
  Var a1 = sigmoid(z1);
  if (train_mode && cfg.dropout > 0.0) {
    if (dropout_rng == nullptr)
      throw std::invalid_argument("encode: train mode requires a dropout stream");
    a1 = dropout(a1, cfg.dropout, *dropout_rng);
  }
  return add(matvec(tape.leaf(params.w2), a1), tape.leaf(params.b2));
}

}  // namespace csip
