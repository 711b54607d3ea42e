#pragma once

#include "csip/training.hpp"

#include <optional>
#include <string>
#include <vector>

namespace csip {

inline constexpr const char* kFingerprint = "csip 0.1.0";

/// One (cell, backbone, seed) run's test predictions. The on-disk format
/// is a single JSON header line prefixed with "#csip-predictions v1 "
/// followed by tab-separated id/gold/pred rows in test order.
struct PredictionFile {
  std::string cell;
  std::string backbone;
  std::uint64_t seed = 0;
  std::string fingerprint = kFingerprint;
  std::vector<PredictionRow> rows;

  std::vector<int> gold() const {
    std::vector<int> g;
    g.reserve(rows.size());
    for (const auto& r : rows) g.push_back(r.gold);
    return g;
  }

  std::vector<int> pred() const {
    std::vector<int> p;
    p.reserve(rows.size());
    for (const auto& r : rows) p.push_back(r.pred);
    return p;
  }
};

void write_prediction_file(const PredictionFile& pf, const std::string& path);
PredictionFile read_prediction_file(const std::string& path);

/// Checks unique ids, exact row count, and gold-vector equality against
/// the reference. Returns the first violated invariant, or nothing when
/// the file is valid.
std::optional<std::string> validate_prediction_file(
    const PredictionFile& pf, const std::vector<int>& reference_gold);

}  // namespace csip
