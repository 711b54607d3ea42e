#include "csip/stratify.hpp"

#include "csip/metrics.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace csip {

std::string md5_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_md5(), nullptr) != 1)
    throw std::runtime_error("md5_hex: digest failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(static_cast<std::size_t>(len) * 2, '0');
  for (unsigned int i = 0; i < len; ++i) {
    out[2 * i] = kHex[digest[i] >> 4];
    out[2 * i + 1] = kHex[digest[i] & 0xF];
  }
  return out;
}

TupleKeys tuple_keys(const Record& record) {
  std::string joined;
  for (std::size_t i = 0; i < record.high_level_laws.size(); ++i) {
    if (i) joined += '\n';
    joined += record.high_level_laws[i];
  }
  TupleKeys k;
  k.superior_key = md5_hex(joined);
  k.golden_key = md5_hex(record.revision_text);
  k.sub_key = md5_hex(record.subordinate_text);
  k.url_key = md5_hex(record.url);
  k.title_key = md5_hex(record.title);
  return k;
}

Stratification partition_seen_unseen(std::span<const Record> train,
                                     std::span<const Record> test) {
  std::unordered_set<std::string> train_tuples;
  train_tuples.reserve(train.size());
  for (const Record& r : train) train_tuples.insert(tuple_keys(r).pair_ag());

  Stratification s;
  s.in_stratum.reserve(test.size());
  for (const Record& r : test) {
    const bool seen = train_tuples.count(tuple_keys(r).pair_ag()) > 0;
    s.in_stratum.push_back(seen ? 0 : 1);  // stratum = Unseen-gB
    (seen ? s.complement_size : s.stratum_size)++;
  }
  return s;
}

Stratification partition_super(std::span<const Record> train,
                               std::span<const Record> test) {
  std::unordered_set<std::string> train_superiors;
  train_superiors.reserve(train.size());
  for (const Record& r : train) train_superiors.insert(tuple_keys(r).superior_key);

  Stratification s;
  s.in_stratum.reserve(test.size());
  for (const Record& r : test) {
    const bool seen = train_superiors.count(tuple_keys(r).superior_key) > 0;
    s.in_stratum.push_back(seen ? 0 : 1);  // stratum = Super-Unseen
    (seen ? s.complement_size : s.stratum_size)++;
  }
  return s;
}

long unique_superior_keys(std::span<const Record> records) {
  std::unordered_set<std::string> keys;
  keys.reserve(records.size());
  for (const Record& r : records) keys.insert(tuple_keys(r).superior_key);
  return static_cast<long>(keys.size());
}

namespace {

struct Projected {
  std::vector<int> gold;
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<int>> method_pred;    // per seed
  std::vector<std::vector<int>> baseline_pred;  // per seed
};

Projected project(std::span<const PredictionFile> method_files,
                  std::span<const PredictionFile> baseline_files,
                  const std::vector<char>& membership) {
  // Pairing and strict invariants byte-for-byte as in the primary path.
  const SeedDeltaSeries series = per_seed_deltas(method_files, baseline_files);
  const std::vector<int> gold = method_files.front().gold();
  if (membership.size() != gold.size())
    throw std::invalid_argument("stratified projection: membership length mismatch");

  std::map<std::uint64_t, std::pair<const PredictionFile*, const PredictionFile*>>
      by_seed;
  for (const auto& f : method_files) by_seed[f.seed].first = &f;
  for (const auto& f : baseline_files) by_seed[f.seed].second = &f;

  Projected p;
  for (std::size_t i = 0; i < gold.size(); ++i)
    if (membership[i]) p.gold.push_back(gold[i]);
  for (const auto& [seed, pair] : by_seed) {
    p.seeds.push_back(seed);
    std::vector<int> mp, bp;
    mp.reserve(p.gold.size());
    bp.reserve(p.gold.size());
    const auto m_all = pair.first->pred();
    const auto b_all = pair.second->pred();
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (!membership[i]) continue;
      mp.push_back(m_all[i]);
      bp.push_back(b_all[i]);
    }
    p.method_pred.push_back(std::move(mp));
    p.baseline_pred.push_back(std::move(bp));
  }
  return p;
}

}  // namespace

std::optional<IntervalEstimate> stratified_deltas(
    std::span<const PredictionFile> method_files,
    std::span<const PredictionFile> baseline_files,
    const std::vector<char>& membership, const BootstrapParams& boot) {
  const Projected p = project(method_files, baseline_files, membership);
  if (p.gold.empty()) return std::nullopt;
  std::vector<double> deltas;
  deltas.reserve(p.seeds.size());
  for (std::size_t s = 0; s < p.seeds.size(); ++s)
    deltas.push_back(macro_f1(p.gold, p.method_pred[s]) -
                     macro_f1(p.gold, p.baseline_pred[s]));
  return interval_estimate(deltas, boot);
}

std::optional<std::array<ClassDelta, kNumClasses>> per_class_stratum_delta(
    std::span<const PredictionFile> method_files,
    std::span<const PredictionFile> baseline_files,
    const std::vector<char>& membership, double level) {
  const Projected p = project(method_files, baseline_files, membership);
  if (p.gold.empty()) return std::nullopt;

  std::array<std::vector<double>, kNumClasses> per_class;
  for (auto& v : per_class) v.reserve(p.seeds.size());
  for (std::size_t s = 0; s < p.seeds.size(); ++s) {
    const auto m = per_class_f1(p.gold, p.method_pred[s]);
    const auto b = per_class_f1(p.gold, p.baseline_pred[s]);
    for (int c = 0; c < kNumClasses; ++c)
      per_class[static_cast<std::size_t>(c)].push_back(
          m[static_cast<std::size_t>(c)] - b[static_cast<std::size_t>(c)]);
  }

  std::array<ClassDelta, kNumClasses> out;
  for (int c = 0; c < kNumClasses; ++c) {
    const auto& deltas = per_class[static_cast<std::size_t>(c)];
    ClassDelta d;
    double sum = 0.0;
    for (double x : deltas) sum += x;
    d.mean = sum / static_cast<double>(deltas.size());
    if (deltas.size() >= 2) {
      std::tie(d.t_lo, d.t_hi) = student_t_ci(deltas, level);
    } else {
      d.t_lo = d.t_hi = d.mean;
    }
    d.lower_bound_positive = d.t_lo > 0.0;
    out[static_cast<std::size_t>(c)] = d;
  }
  return out;
}

namespace {

using KeyFn = std::string (*)(const Record&);

OverlapCount overlap_for(std::span<const Record> first,
                         std::span<const Record> second, KeyFn key) {
  std::unordered_map<std::string, long> first_counts;
  for (const Record& r : first) {
    const std::string k = key(r);
    if (!k.empty()) ++first_counts[k];
  }
  std::unordered_map<std::string, long> second_counts;
  for (const Record& r : second) {
    const std::string k = key(r);
    if (!k.empty()) ++second_counts[k];
  }
  OverlapCount c;
  for (const auto& [k, n2] : second_counts) {
    auto it = first_counts.find(k);
    if (it == first_counts.end()) continue;
    ++c.distinct;
    c.affected_first += it->second;
    c.affected_second += n2;
  }
  return c;
}

}  // namespace

OverlapAudit overlap_audit(std::span<const Record> train,
                           std::span<const Record> val,
                           std::span<const Record> test) {
  const std::pair<const char*, KeyFn> keys[] = {
      {"record_id", [](const Record& r) { return r.id; }},
      {"url", [](const Record& r) { return r.url; }},
      {"title", [](const Record& r) { return r.title; }},
      {"pair_ab", [](const Record& r) { return tuple_keys(r).pair_ab(); }},
      {"pair_ag", [](const Record& r) { return tuple_keys(r).pair_ag(); }},
  };
  struct Pair {
    const char* name;
    std::span<const Record> first;
    std::span<const Record> second;
  };
  const Pair pairs[] = {{"train-val", train, val},
                        {"train-test", train, test},
                        {"val-test", val, test}};
  OverlapAudit audit;
  for (const auto& [key_name, fn] : keys)
    for (const auto& p : pairs)
      audit.counts[key_name][p.name] = overlap_for(p.first, p.second, fn);
  return audit;
}

}  // namespace csip
