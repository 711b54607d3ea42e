#include "csip/predfile.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <unordered_set>

namespace csip {

using nlohmann::json;

namespace {
constexpr const char* kMagic = "#csip-predictions v1 ";
}

void write_prediction_file(const PredictionFile& pf, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_prediction_file: cannot write " + path);
  json header;
  header["cell"] = pf.cell;
  header["backbone"] = pf.backbone;
  header["seed"] = pf.seed;
  header["fingerprint"] = pf.fingerprint;
  out << kMagic << header.dump() << '\n';
  for (const auto& r : pf.rows)
    out << r.id << '\t' << r.gold << '\t' << r.pred << '\n';
  if (!out) throw std::runtime_error("write_prediction_file: write failed for " + path);
}

PredictionFile read_prediction_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_prediction_file: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind(kMagic, 0) != 0)
    throw std::runtime_error("read_prediction_file: bad header in " + path);
  const json header = json::parse(line.substr(std::string(kMagic).size()));
  PredictionFile pf;
  pf.cell = header.at("cell").get<std::string>();
  pf.backbone = header.at("backbone").get<std::string>();
  pf.seed = header.at("seed").get<std::uint64_t>();
  pf.fingerprint = header.at("fingerprint").get<std::string>();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    PredictionRow r;
    if (!(std::getline(row, r.id, '\t') && row >> r.gold && row >> r.pred))
      throw std::runtime_error("read_prediction_file: malformed row in " + path);
    pf.rows.push_back(std::move(r));
  }
  return pf;
}

std::optional<std::string> validate_prediction_file(
    const PredictionFile& pf, const std::vector<int>& reference_gold) {
  std::unordered_set<std::string> seen;
  seen.reserve(pf.rows.size());
  for (const auto& r : pf.rows)
    if (!seen.insert(r.id).second) return "duplicate-id:" + r.id;
  if (pf.rows.size() != reference_gold.size())
    return "row-count:" + std::to_string(pf.rows.size()) + "!=" +
           std::to_string(reference_gold.size());
  for (std::size_t i = 0; i < pf.rows.size(); ++i)
    if (pf.rows[i].gold != reference_gold[i])
      return "gold-mismatch:row" + std::to_string(i);
  return std::nullopt;
}

}  // namespace csip
