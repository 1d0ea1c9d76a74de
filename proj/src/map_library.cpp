#include "scenecode/map_library.hpp"

#include <cstdlib>
#include <fstream>
#include <limits>

namespace scenecode {

namespace {

constexpr const char* kIndexFormat = "scenecode-map-index";
constexpr int kIndexVersion = 1;

}  // namespace

MapIndex build_index(const std::vector<Scenario>& scenarios, const CodecConfig& cfg,
                     const std::vector<std::string>& source_ids) {
  if (scenarios.empty()) throw InvalidInputError("build_index needs at least one scenario");
  if (!source_ids.empty() && source_ids.size() != scenarios.size()) {
    throw InvalidInputError("build_index: source id count differs from scenario count");
  }
  MapIndex idx;
  idx.entries.reserve(scenarios.size());
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    require_valid(scenarios[i]);
    idx.entries.push_back({extract_map_code(scenarios[i], cfg), scenarios[i].map,
                           source_ids.empty() ? "scenario-" + std::to_string(i) : source_ids[i]});
  }
  return idx;
}

int map_code_distance(const MapCode& a, const MapCode& b) {
  const auto fa = a.flatten();
  const auto fb = b.flatten();
  int d = 0;
  for (std::size_t k = 0; k < fa.size(); ++k) {
    if (k == 4 && ((fa[k] == -1) != (fb[k] == -1))) {
      d += kIntersectionPresencePenalty;
    } else {
      d += std::abs(fa[k] - fb[k]);
    }
  }
  return d;
}

RetrievedMap retrieve(const MapIndex& idx, const MapCode& code) {
  if (idx.entries.empty()) throw InvalidInputError("retrieve: map index is empty");
  std::size_t best = 0;
  int best_distance = std::numeric_limits<int>::max();
  for (std::size_t i = 0; i < idx.entries.size(); ++i) {
    const int d = map_code_distance(code, idx.entries[i].code);
    if (d < best_distance) {
      best_distance = d;
      best = i;
    }
  }
  return {idx.entries[best].map, best_distance, best};
}

nlohmann::json map_index_to_json(const MapIndex& idx) {
  nlohmann::json entries = nlohmann::json::array();
  for (const MapIndexEntry& e : idx.entries) {
    entries.push_back({{"code", e.code.flatten()}, {"source_id", e.source_id}, {"map", lane_map_to_json(e.map)}});
  }
  return {{"format", kIndexFormat}, {"version", kIndexVersion}, {"entries", std::move(entries)}};
}

MapIndex map_index_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string()) != kIndexFormat) {
    throw InvalidInputError("not a map index file");
  }
  if (j.value("version", 0) != kIndexVersion) {
    throw InvalidInputError("unsupported map index version " + std::to_string(j.value("version", 0)));
  }
  MapIndex idx;
  for (const auto& ej : j.at("entries")) {
    const auto flat = ej.at("code").get<std::array<int, kMapCodeLength>>();
    idx.entries.push_back({MapCode::from_flat(flat), lane_map_from_json(ej.at("map")),
                           ej.at("source_id").get<std::string>()});
  }
  return idx;
}

MapIndex load_map_index(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open map index '" + path + "'");
  try {
    nlohmann::json j;
    in >> j;
    return map_index_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInputError("malformed map index '" + path + "': " + e.what());
  }
}

void save_map_index(const MapIndex& idx, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write map index '" + path + "'");
  out << map_index_to_json(idx).dump() << '\n';
}

}  // namespace scenecode
