#pragma once

#include "csip/data.hpp"
#include "csip/stats.hpp"

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace csip {

/// Lowercase hex MD5 of the given bytes.
std::string md5_hex(std::string_view bytes);

/// Hash keys identifying a record's tuple structure. The superior key
/// digests the high-level-laws list joined with a single newline; empty
/// fields hash the empty string.
struct TupleKeys {
  std::string superior_key;  // md5(join(high_level_laws, "\n"))
  std::string golden_key;    // md5(revision_text)
  std::string sub_key;       // md5(subordinate_text)
  std::string url_key;
  std::string title_key;

  std::string pair_ab() const { return superior_key + sub_key; }
  std::string pair_ag() const { return superior_key + golden_key; }
};

TupleKeys tuple_keys(const Record& record);

/// Per-test-record stratum membership; `in_stratum[i]` aligns with the
/// i-th test record.
struct Stratification {
  std::vector<char> in_stratum;
  long stratum_size = 0;
  long complement_size = 0;
};

/// Seen-gB: the (superior, revision) tuple occurs in some training
/// record. Returns membership of the *Unseen*-gB stratum complemented by
/// Seen-gB via `complement_size`.
Stratification partition_seen_unseen(std::span<const Record> train,
                                     std::span<const Record> test);

/// Super-Unseen: the superior key is absent from the whole training
/// split.
Stratification partition_super(std::span<const Record> train,
                               std::span<const Record> test);

/// Count of distinct superior keys in a split.
long unique_superior_keys(std::span<const Record> records);

/// Restricts each validated prediction file to the stratum rows,
/// recomputes macro-F1 with the locked 5-label denominator, and reuses
/// the seed-as-unit interval machinery on the projected deltas. An empty
/// stratum yields no estimate rather than zeros.
std::optional<IntervalEstimate> stratified_deltas(
    std::span<const PredictionFile> method_files,
    std::span<const PredictionFile> baseline_files,
    const std::vector<char>& membership, const BootstrapParams& boot = {});

struct ClassDelta {
  double mean = 0.0;
  double t_lo = 0.0;
  double t_hi = 0.0;
  bool lower_bound_positive = false;
};

/// Per-class F1 deltas within a stratum, averaged over seeds, with
/// Student-t interval flags.
std::optional<std::array<ClassDelta, kNumClasses>> per_class_stratum_delta(
    std::span<const PredictionFile> method_files,
    std::span<const PredictionFile> baseline_files,
    const std::vector<char>& membership, double level = 0.95);

/// Cross-split overlap accounting for one key: the number of distinct
/// key values present in both splits, plus how many records on each side
/// carry a shared value.
struct OverlapCount {
  long distinct = 0;
  long affected_first = 0;
  long affected_second = 0;
};

struct OverlapAudit {
  // key name -> split-pair name ("train-val", "train-test", "val-test")
  std::map<std::string, std::map<std::string, OverlapCount>> counts;
};

/// Distinct-value overlap per key (record id, url, title, (A,B) tuple,
/// (A,gB) tuple) for each split pair. Empty url/title values do not
/// participate; revision keys always do.
OverlapAudit overlap_audit(std::span<const Record> train,
                           std::span<const Record> val,
                           std::span<const Record> test);

}  // namespace csip
