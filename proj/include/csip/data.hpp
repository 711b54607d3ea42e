#pragma once

#include "csip/encoder.hpp"
#include "csip/heads.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace csip {

/// One benchmark item. `revision_text` is the expert rewrite of the
/// subordinate text that removes the conflict; empty for no-conflict
/// records and for conflict records whose revision was not usable.
struct Record {
  std::string id;
  std::string superior_text;
  std::string subordinate_text;
  std::string revision_text;
  int label = kNoConflict;
  std::vector<std::string> high_level_laws;
  std::string url;
  std::string title;
};

inline constexpr std::array<const char*, kNumClasses> kLabelNames = {
    "Responsibility", "Condition", "Sanction", "Definition", "No-Conflict"};

/// Maps a label string to {0..4}; returns -1 for anything else. Accepts
/// the canonical names plus case/underscore/hyphen variants and an
/// optional "conflict" suffix.
int label_from_name(const std::string& name);

struct SkipReport {
  long kept = 0;
  long skipped_decode = 0;
  long skipped_label = 0;
  std::array<long, kNumClasses> label_counts{};
};

/// Reads one JSON object per line, applying two filters in fixed order:
/// lines that fail strict decoding (or lack the required fields) are
/// skipped first, then records whose label string does not map to one of
/// the five canonical names. Order-preserving; no deduplication.
std::pair<std::vector<Record>, SkipReport> ingest_split(const std::string& path);

/// A pretraining example: tokenized (A,B) pair plus, for conflict
/// records, the tokenized (A, revision) counterpart and the target factor.
struct CsipTriplet {
  std::string id;
  TokenSequence pair_b;
  std::optional<TokenSequence> pair_g;
  int target = -1;

  bool is_conflict() const { return pair_g.has_value(); }
};

/// Conflict records with an empty revision, or a revision byte-identical
/// to the subordinate text, are dropped (the selectivity term would be
/// trivially zero). No-conflict records are always kept. Order preserved.
std::vector<CsipTriplet> build_csip_triplets(std::span<const Record> records,
                                             const EncoderConfig& cfg);

/// Synthetic corpus layout mirroring the benchmark's structural
/// properties: per-class counts per split, the fraction of test records
/// whose (superior, revision) tuple recurs from training, and the
/// fraction whose superior recurs at all.
struct CorpusConfig {
  std::array<int, kNumClasses> train_counts{469, 334, 271, 97, 229};
  std::array<int, kNumClasses> val_counts{100, 71, 58, 21, 50};
  std::array<int, kNumClasses> test_counts{99, 71, 57, 21, 52};
  double seen_gb_fraction = 452.0 / 696.0;
  double super_seen_fraction = 548.0 / 696.0;
  std::uint64_t seed = 1;
};

/// Per-test-record ground truth written by the generator.
struct StratumTruth {
  std::string id;
  bool seen_gb = false;
  bool super_seen = false;
};

struct SyntheticCorpus {
  std::vector<Record> train;
  std::vector<Record> val;
  std::vector<Record> test;
  std::vector<StratumTruth> truth;  // aligned with test
};

/// Deterministic per seed. Each conflict type is signaled by a
/// type-specific marker absent from the revision, so the toy encoder can
/// in principle separate the classes.
SyntheticCorpus generate_synthetic_corpus(const CorpusConfig& config);

/// Writes train.jsonl / val.jsonl / test.jsonl / strata_truth.tsv.
void write_corpus(const SyntheticCorpus& corpus, const std::string& out_dir);

std::string record_to_json(const Record& r);

}  // namespace csip
