// Scene codes (map, vehicle, interaction) and the analyzer that extracts them
// from ground-truth trajectories.
#pragma once

#include <array>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "scenecode/scenario.hpp"

namespace scenecode {

struct CodecConfig {
  double interaction_distance_gap{15.0};
  int interaction_areas{6};
  double vehicle_distance_gap{15.0};
  int vehicle_distance_max_bin{3};
  double speed_gap{2.5};
  int speed_max_bin{8};
  int sample_count_interaction{5};
  int sample_count_speed{6};
  double lane_width{kDefaultLaneWidth};
  double angle_threshold{std::numbers::pi / 12.0};
  /// Trajectories with a larger invalid fraction classify as straight and are flagged.
  double max_invalid_fraction{0.2};

  /// Throws InvalidInputError naming the offending field.
  void validate() const;
};

nlohmann::json codec_config_to_json(const CodecConfig& c);
/// Unknown keys are rejected by name; missing keys keep their defaults.
CodecConfig codec_config_from_json(const nlohmann::json& j);

enum class TrajectoryType : int {
  stop = 0,
  straight = 1,
  left_turn = 2,
  right_turn = 3,
  left_lane_change = 4,
  right_lane_change = 5,
};

inline constexpr int kTrajectoryTypeCount = 6;

std::string_view to_string(TrajectoryType t);
TrajectoryType trajectory_type_from_string(std::string_view s);
TrajectoryType trajectory_type_from_int(int v);

inline constexpr int kInteractionSamples = 5;
inline constexpr int kSpeedSamples = 6;
inline constexpr int kVehicleCodeLength = 10;
inline constexpr int kMapCodeLength = 6;
inline constexpr int kVehiclePositionAreas = 6;
inline constexpr int kInteractionDistanceMaxBin = 5;
inline constexpr int kIntersectionDistanceMaxBin = 3;
inline constexpr int kDirectionClasses = 4;

/// Frames sampled for interaction codes: the end of each second.
inline constexpr std::array<std::size_t, kInteractionSamples> kInteractionFrames{9, 19, 29, 39, 49};
/// Frames sampled for the vehicle speed trend, initial and final speed included.
inline constexpr std::array<std::size_t, kSpeedSamples> kSpeedFrames{0, 10, 20, 30, 40, 49};

struct InteractionCode {
  std::array<int, kInteractionSamples> distance_bins{};
  std::array<int, kInteractionSamples> direction_sectors{};

  friend bool operator==(const InteractionCode&, const InteractionCode&) = default;
  [[nodiscard]] std::array<int, 2 * kInteractionSamples> flatten() const;
};

struct VehicleCode {
  int pos_sector{-1};
  int distance_bin{0};
  int direction_class{0};
  std::array<int, kSpeedSamples> speed_bins{};
  TrajectoryType action{TrajectoryType::straight};

  friend bool operator==(const VehicleCode&, const VehicleCode&) = default;
  [[nodiscard]] std::array<int, kVehicleCodeLength> flatten() const;
  static VehicleCode from_flat(const std::array<int, kVehicleCodeLength>& v);
};

struct MapCode {
  int same_dir_lanes{1};
  int opposite_dir_lanes{0};
  int perp_up_lanes{0};
  int perp_down_lanes{0};
  int dist_to_intersection_bin{-1};
  int ego_lane_id{1};

  friend bool operator==(const MapCode&, const MapCode&) = default;
  [[nodiscard]] std::array<int, kMapCodeLength> flatten() const;
  static MapCode from_flat(const std::array<int, kMapCodeLength>& v);
};

struct CodeBundle {
  MapCode map_code;
  std::vector<VehicleCode> vehicle_codes;
  std::vector<InteractionCode> interaction_codes;

  friend bool operator==(const CodeBundle&, const CodeBundle&) = default;
  [[nodiscard]] std::size_t vehicle_count() const { return vehicle_codes.size(); }
};

/// Lists broken CodeBundle invariants; empty when the bundle is valid.
std::vector<std::string> validate_bundle(const CodeBundle& b, int interaction_areas = 6);

class DegenerateInputError : public InvalidInputError {
 public:
  using InvalidInputError::InvalidInputError;
};

/// Sector of `relative_position` around a vehicle facing `heading`. Sector 0
/// is centered on the heading; indices increase clockwise (front, front
/// right, ..., front left for 6 areas). Wedges are half-open at their
/// clockwise edge.
int sector_of(Vec2 relative_position, Vec2 heading, int areas);

/// min(floor(d / gap), max_bin).
int distance_bin(double d, double gap, int max_bin);
/// min(floor(v / gap), max_bin), 2.5 m/s and 8 by default.
int speed_bin(double v, double gap = 2.5, int max_bin = 8);

struct Classification {
  TrajectoryType type{TrajectoryType::straight};
  /// Set when too many timesteps were invalid to classify.
  bool flagged{false};
};

/// Signed heading change from the first to the last valid heading, radians.
double heading_change(const Trajectory& traj);
/// Displacement perpendicular to the first valid heading, meters.
double lateral_displacement(const Trajectory& traj);

Classification classify_trajectory_detailed(const Trajectory& traj, const CodecConfig& cfg);
TrajectoryType classify_trajectory(const Trajectory& traj, const CodecConfig& cfg);

/// 0 same, 1 opposite, 2 perpendicular up (pointing left of ego), 3 down.
int direction_class(Vec2 ego_heading, Vec2 other_heading);

MapCode extract_map_code(const Scenario& s, const CodecConfig& cfg);
/// The analyzer: discretizes a ground-truth scenario into its scene codes.
CodeBundle extract_codes(const Scenario& s, const CodecConfig& cfg);

}  // namespace scenecode
