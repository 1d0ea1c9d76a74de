// Map index keyed by map codes, with best-fit retrieval.
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "scenecode/codec.hpp"
#include "scenecode/scenario.hpp"

namespace scenecode {

struct MapIndexEntry {
  MapCode code;
  LaneMap map;
  std::string source_id;
};

struct MapIndex {
  std::vector<MapIndexEntry> entries;
};

struct RetrievedMap {
  LaneMap map;
  int match_distance{0};
  std::size_t entry_index{0};
};

/// Penalty when exactly one side of a comparison has no intersection.
inline constexpr int kIntersectionPresencePenalty = 4;

/// One entry per scenario, in input order. `source_ids` may be empty, in which
/// case entries are labelled by their position.
MapIndex build_index(const std::vector<Scenario>& scenarios, const CodecConfig& cfg,
                     const std::vector<std::string>& source_ids = {});

/// Unit-weight L1 distance between map codes.
int map_code_distance(const MapCode& a, const MapCode& b);

/// Exhaustive best match; ties go to the earliest inserted entry.
RetrievedMap retrieve(const MapIndex& idx, const MapCode& code);

nlohmann::json map_index_to_json(const MapIndex& idx);
MapIndex map_index_from_json(const nlohmann::json& j);
MapIndex load_map_index(const std::string& path);
void save_map_index(const MapIndex& idx, const std::string& path);

}  // namespace scenecode
