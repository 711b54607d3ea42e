#include "csip/data.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace csip {

using nlohmann::json;

namespace {

std::string normalize_label(const std::string& name) {
  std::string out;
  for (char ch : name)
    if (std::isalnum(static_cast<unsigned char>(ch)))
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  return out;
}

int base_label_index(const std::string& norm) {
  if (norm == "responsibility") return 0;
  if (norm == "condition") return 1;
  if (norm == "sanction") return 2;
  if (norm == "definition") return 3;
  return -1;
}

}  // namespace

int label_from_name(const std::string& name) {
  const std::string norm = normalize_label(name);
  if (norm == "noconflict") return kNoConflict;
  const int direct = base_label_index(norm);
  if (direct >= 0) return direct;
  static constexpr std::string_view suffix = "conflict";
  if (norm.size() > suffix.size() &&
      norm.compare(norm.size() - suffix.size(), suffix.size(), suffix) == 0)
    return base_label_index(norm.substr(0, norm.size() - suffix.size()));
  return -1;
}

std::pair<std::vector<Record>, SkipReport> ingest_split(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("ingest_split: cannot open " + path);

  std::vector<Record> records;
  SkipReport report;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;

    // Filter 1: strict decoding. The line must be a JSON object carrying
    // the required string fields with the right types.
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    std::string label_name;
    Record r;
    bool decoded = j.is_object();
    if (decoded) {
      const auto get_string = [&](const char* key, std::string& dst,
                                  bool required) {
        auto it = j.find(key);
        if (it == j.end()) return !required;
        if (!it->is_string()) return false;
        dst = it->get<std::string>();
        return true;
      };
      decoded = get_string("id", r.id, true) &&
                get_string("superior_text", r.superior_text, true) &&
                get_string("subordinate_text", r.subordinate_text, true) &&
                get_string("revision_text", r.revision_text, false) &&
                get_string("url", r.url, false) &&
                get_string("title", r.title, false);
      if (decoded) {
        if (!get_string("label", label_name, true) &&
            !get_string("conflict_type_en", label_name, true))
          decoded = false;
      }
      if (decoded && j.contains("high_level_laws")) {
        const auto& arr = j["high_level_laws"];
        if (!arr.is_array()) {
          decoded = false;
        } else {
          for (const auto& v : arr) {
            if (!v.is_string()) {
              decoded = false;
              break;
            }
            r.high_level_laws.push_back(v.get<std::string>());
          }
        }
      }
    }
    if (!decoded) {
      ++report.skipped_decode;
      continue;
    }

    // Filter 2: the label string must map to one of the five canonical names.
    const int label = label_from_name(label_name);
    if (label < 0) {
      ++report.skipped_label;
      continue;
    }
    r.label = label;
    ++report.kept;
    ++report.label_counts[static_cast<std::size_t>(label)];
    records.push_back(std::move(r));
  }
  return {std::move(records), report};
}

std::vector<CsipTriplet> build_csip_triplets(std::span<const Record> records,
                                             const EncoderConfig& cfg) {
  std::vector<CsipTriplet> out;
  out.reserve(records.size());
  for (const Record& r : records) {
    const auto a_ids = tokenize(r.superior_text, cfg.vocab);
    const auto b_ids = tokenize(r.subordinate_text, cfg.vocab);
    if (r.label == kNoConflict) {
      CsipTriplet t;
      t.id = r.id;
      t.pair_b = build_pair_sequence(a_ids, b_ids, cfg.max_len);
      out.push_back(std::move(t));
      continue;
    }
    if (r.revision_text.empty()) continue;
    if (r.revision_text == r.subordinate_text) continue;
    CsipTriplet t;
    t.id = r.id;
    t.pair_b = build_pair_sequence(a_ids, b_ids, cfg.max_len);
    t.pair_g = build_pair_sequence(a_ids, tokenize(r.revision_text, cfg.vocab),
                                   cfg.max_len);
    t.target = r.label;
    out.push_back(std::move(t));
  }
  return out;
}

namespace {

constexpr std::array<const char*, kNumFactors> kMarkers = {"Ⓡ", "Ⓒ", "Ⓢ", "Ⓓ"};

const std::vector<std::string>& default_fragments() {
  static const std::vector<std::string> kFragments = {
      "条款", "应当", "不得", "罚款", "许可", "备案", "监督", "管理",
      "责任", "条件", "处罚", "定义", "范围", "标准", "程序", "期限"};
  return kFragments;
}

std::string pick_fragments(Xoshiro256ss& rng, int n) {
  const auto& frags = default_fragments();
  std::string out;
  for (int i = 0; i < n; ++i) {
    if (i) out += " ";
    out += frags[static_cast<std::size_t>(rng.below(frags.size()))];
  }
  return out;
}

struct Superior {
  std::string text;
  std::vector<std::string> laws;
};

Superior fresh_superior(Xoshiro256ss& rng, long uid) {
  Superior s;
  const std::string tag = "u" + std::to_string(uid);
  s.laws = {"law-" + tag, "art-" + std::to_string(rng.below(9) + 1)};
  s.text = "上位 " + tag + " " + pick_fragments(rng, 3);
  return s;
}

std::string marker_block(int label) {
  std::string m;
  for (int i = 0; i < 4; ++i) m += kMarkers[static_cast<std::size_t>(label)];
  return m;
}

}  // namespace

SyntheticCorpus generate_synthetic_corpus(const CorpusConfig& config) {
  if (config.seen_gb_fraction < 0.0 || config.seen_gb_fraction > 1.0 ||
      config.super_seen_fraction < 0.0 || config.super_seen_fraction > 1.0)
    throw std::invalid_argument("generate_synthetic_corpus: fractions outside [0,1]");
  for (const auto& counts :
       {config.train_counts, config.val_counts, config.test_counts})
    for (int c : counts)
      if (c < 0) throw std::invalid_argument("generate_synthetic_corpus: negative count");

  Xoshiro256ss rng(config.seed);
  long uid = 0;

  const auto label_list = [&](const std::array<int, kNumClasses>& counts) {
    std::vector<int> labels;
    for (int c = 0; c < kNumClasses; ++c)
      labels.insert(labels.end(), static_cast<std::size_t>(counts[static_cast<std::size_t>(c)]), c);
    rng.shuffle(labels);
    return labels;
  };

  // A record body whose revision carries a unique uid, so fresh tuples
  // can never collide with anything else in the corpus.
  const auto make_body = [&](Record& r, int label) {
    r.label = label;
    const std::string rest =
        pick_fragments(rng, 4) + " u" + std::to_string(uid++);
    if (label == kNoConflict) {
      r.subordinate_text = "下位 " + rest;
      r.revision_text.clear();
    } else {
      r.subordinate_text = marker_block(label) + " 下位 " + rest;
      r.revision_text = "下位 " + rest;
    }
  };

  const auto finish = [&](Record& r, const Superior& sup, const std::string& prefix,
                          std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%06zu", index);
    r.id = prefix + buf;
    r.superior_text = sup.text;
    r.high_level_laws = sup.laws;
    r.url = "https://example.invalid/r/" + r.id;
    r.title = "doc-" + r.id;
  };

  SyntheticCorpus corpus;

  // Train and validation: one fresh superior per record.
  const auto gen_plain = [&](const std::array<int, kNumClasses>& counts,
                             const std::string& prefix, std::vector<Record>& out) {
    const auto labels = label_list(counts);
    out.reserve(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      Record r;
      make_body(r, labels[i]);
      const Superior sup = fresh_superior(rng, uid++);
      finish(r, sup, prefix, i + 1);
      out.push_back(std::move(r));
    }
  };
  gen_plain(config.train_counts, "train-", corpus.train);
  gen_plain(config.val_counts, "val-", corpus.val);

  std::vector<std::size_t> train_conflict_idx;
  for (std::size_t i = 0; i < corpus.train.size(); ++i)
    if (corpus.train[i].label != kNoConflict) train_conflict_idx.push_back(i);

  // Test stratum targets.
  const auto test_labels = label_list(config.test_counts);
  const long n_test = static_cast<long>(test_labels.size());
  const long n_seen = std::lround(config.seen_gb_fraction * static_cast<double>(n_test));
  const long n_super_seen =
      std::lround(config.super_seen_fraction * static_cast<double>(n_test));
  if (n_seen > n_super_seen)
    throw std::invalid_argument(
        "generate_synthetic_corpus: seen_gb fraction exceeds super_seen fraction");

  std::vector<std::size_t> conflict_slots;
  for (std::size_t i = 0; i < test_labels.size(); ++i)
    if (test_labels[i] != kNoConflict) conflict_slots.push_back(i);
  if (n_seen > static_cast<long>(conflict_slots.size()))
    throw std::invalid_argument(
        "generate_synthetic_corpus: not enough conflict test records for seen_gb fraction");
  if (n_seen > 0 && train_conflict_idx.empty())
    throw std::invalid_argument(
        "generate_synthetic_corpus: seen_gb fraction requires train conflict records");
  if (n_super_seen > 0 && corpus.train.empty())
    throw std::invalid_argument(
        "generate_synthetic_corpus: super_seen fraction requires train records");

  enum class Stratum { kSeen, kSuperOnly, kUnseen };
  std::vector<Stratum> strata(test_labels.size(), Stratum::kUnseen);
  rng.shuffle(conflict_slots);
  for (long k = 0; k < n_seen; ++k)
    strata[conflict_slots[static_cast<std::size_t>(k)]] = Stratum::kSeen;
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < strata.size(); ++i)
    if (strata[i] == Stratum::kUnseen) rest.push_back(i);
  rng.shuffle(rest);
  const long n_super_only = n_super_seen - n_seen;
  if (n_super_only > static_cast<long>(rest.size()))
    throw std::invalid_argument("generate_synthetic_corpus: infeasible stratum counts");
  for (long k = 0; k < n_super_only; ++k)
    strata[rest[static_cast<std::size_t>(k)]] = Stratum::kSuperOnly;

  bool needs_conflict_superior = false;
  for (std::size_t i = 0; i < strata.size(); ++i)
    if (strata[i] == Stratum::kSuperOnly && test_labels[i] == kNoConflict)
      needs_conflict_superior = true;
  if (needs_conflict_superior && train_conflict_idx.empty())
    throw std::invalid_argument(
        "generate_synthetic_corpus: no-conflict super-seen records require train "
        "conflict records");

  corpus.test.reserve(test_labels.size());
  corpus.truth.reserve(test_labels.size());
  for (std::size_t i = 0; i < test_labels.size(); ++i) {
    Record r;
    make_body(r, test_labels[i]);
    Superior sup;
    StratumTruth truth;
    switch (strata[i]) {
      case Stratum::kSeen: {
        // Reuse a full (superior, revision) tuple from a train conflict
        // record; only the subordinate text is fresh.
        const Record& donor = corpus.train[train_conflict_idx[static_cast<std::size_t>(
            rng.below(train_conflict_idx.size()))]];
        sup.text = donor.superior_text;
        sup.laws = donor.high_level_laws;
        r.revision_text = donor.revision_text;
        truth.seen_gb = true;
        truth.super_seen = true;
        break;
      }
      case Stratum::kSuperOnly: {
        // Reuse a train superior with a fresh revision. No-conflict
        // records hash an empty revision, so they may only reuse
        // superiors of train conflict records.
        const Record& donor =
            test_labels[i] == kNoConflict
                ? corpus.train[train_conflict_idx[static_cast<std::size_t>(
                      rng.below(train_conflict_idx.size()))]]
                : corpus.train[static_cast<std::size_t>(rng.below(corpus.train.size()))];
        sup.text = donor.superior_text;
        sup.laws = donor.high_level_laws;
        truth.super_seen = true;
        break;
      }
      case Stratum::kUnseen:
        sup = fresh_superior(rng, uid++);
        break;
    }
    finish(r, sup, "test-", i + 1);
    truth.id = r.id;
    corpus.test.push_back(std::move(r));
    corpus.truth.push_back(std::move(truth));
  }
  return corpus;
}

std::string record_to_json(const Record& r) {
  json j;
  j["id"] = r.id;
  j["superior_text"] = r.superior_text;
  j["subordinate_text"] = r.subordinate_text;
  j["revision_text"] = r.revision_text;
  j["label"] = kLabelNames[static_cast<std::size_t>(r.label)];
  j["high_level_laws"] = r.high_level_laws;
  j["url"] = r.url;
  j["title"] = r.title;
  return j.dump();
}

void write_corpus(const SyntheticCorpus& corpus, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const auto write_split = [&](const std::vector<Record>& records,
                               const std::string& name) {
    std::ofstream out(out_dir + "/" + name, std::ios::binary);
    if (!out) throw std::runtime_error("write_corpus: cannot write " + name);
    for (const Record& r : records) out << record_to_json(r) << '\n';
  };
  write_split(corpus.train, "train.jsonl");
  write_split(corpus.val, "val.jsonl");
  write_split(corpus.test, "test.jsonl");

  std::ofstream truth(out_dir + "/strata_truth.tsv", std::ios::binary);
  if (!truth) throw std::runtime_error("write_corpus: cannot write strata_truth.tsv");
  truth << "id\tseen_gb\tsuper_seen\n";
  for (const StratumTruth& t : corpus.truth)
    truth << t.id << '\t' << (t.seen_gb ? 1 : 0) << '\t' << (t.super_seen ? 1 : 0)
          << '\n';
}

}  // namespace csip
