// Deterministic synthetic scenarios built from straight lanes and simple
// maneuvers; the desk-scale stand-in for recorded driving data.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "scenecode/codec.hpp"
#include "scenecode/scenario.hpp"

namespace scenecode {

class InvalidSpecError : public InvalidInputError {
 public:
  using InvalidInputError::InvalidInputError;
};

enum class MapTemplateKind { straight_road, four_way_intersection };

struct MapTemplate {
  MapTemplateKind kind{MapTemplateKind::straight_road};
  int same_lanes{2};
  int opposite_lanes{0};
  /// Crossing road lanes; only used by the intersection template.
  int perp_up_lanes{1};
  int perp_down_lanes{1};
  /// Distance from the ego start to the intersection center along +x.
  double intersection_ahead{35.0};
  double lane_width{kDefaultLaneWidth};
};

struct VehicleSpec {
  TrajectoryType type{TrajectoryType::straight};
  LaneDirection lane_direction{LaneDirection::same};
  int lane_id{1};
  /// Signed position along the lane's driving direction, measured from the
  /// lane point closest to the ego start (or to the intersection center for
  /// crossing lanes).
  double station{0.0};
  double initial_speed{10.0};
  double final_speed{10.0};
  double length{kDefaultVehicleLength};
  double width{kDefaultVehicleWidth};
};

/// vehicles[0] is the ego; it must sit in a same-direction lane at station 0,
/// which places it at the origin facing +x.
struct SynthSpec {
  MapTemplate map;
  std::vector<VehicleSpec> vehicles;
};

nlohmann::json synth_spec_to_json(const SynthSpec& s);
SynthSpec synth_spec_from_json(const nlohmann::json& j);

/// Builds the lane map of a template. The ego lane (same-direction lane
/// `ego_lane_id`) runs along the x axis.
LaneMap build_lane_map(const MapTemplate& t, int ego_lane_id);

/// Deterministic in (spec, seed). The seed only shapes maneuvers (arc
/// placement, radius and sweep); straight and stopped vehicles do not depend
/// on it. Every trajectory is checked against its requested type and an
/// InvalidSpecError is thrown when the request cannot be realized.
Scenario synth_scenario(const SynthSpec& spec, std::uint64_t seed);

/// A single-vehicle spec of the requested type with seed-chosen speeds.
SynthSpec random_single_type_spec(TrajectoryType type, std::uint64_t seed);

/// A multi-vehicle spec on a random template with seed-chosen vehicles, types
/// and speeds. Always realizable.
SynthSpec random_synth_spec(std::uint64_t seed, int max_vehicles = 4);

/// `count` scenarios whose code bundles are pairwise distinct and whose
/// agents within a scenario have distinct codes. Maps sharing a map code are
/// identical, so code-based retrieval recovers the source map.
std::vector<Scenario> synth_dataset(std::size_t count, std::uint64_t seed, int max_vehicles = 4);

}  // namespace scenecode
