// Scenario data model: lanes, vehicles, trajectories and their kinematics.
#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace scenecode {

/// Number of timesteps per trajectory. Code bins depend on it, so it is a
/// build-level constant rather than a runtime option.
inline constexpr std::size_t kTimesteps = 50;
inline constexpr double kTimestepSeconds = 0.1;
inline constexpr std::size_t kMaxVehicles = 32;
inline constexpr std::size_t kMaxLanes = 384;
inline constexpr double kDefaultLaneWidth = 3.7;
inline constexpr double kDefaultVehicleLength = 4.8;
inline constexpr double kDefaultVehicleWidth = 2.0;

class InvalidInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Vec2 {
  double x{0.0};
  double y{0.0};

  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend constexpr Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
  friend constexpr bool operator==(Vec2 a, Vec2 b) = default;

  [[nodiscard]] double norm() const { return std::hypot(x, y); }
};

using Position2D = Vec2;

constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
/// z component of the 3D cross product of (a,0) and (b,0).
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
/// Rotates `v` by the rotation that maps (1,0) onto the unit vector `heading`.
constexpr Vec2 rotate(Vec2 v, Vec2 heading) {
  return {heading.x * v.x - heading.y * v.y, heading.y * v.x + heading.x * v.y};
}
/// Expresses a world vector in the frame whose +x axis is `heading`.
constexpr Vec2 to_frame(Vec2 v, Vec2 heading) {
  return {heading.x * v.x + heading.y * v.y, -heading.y * v.x + heading.x * v.y};
}

struct Trajectory {
  std::vector<Position2D> positions;
  std::vector<Vec2> headings;
  std::vector<double> speeds;
  std::vector<bool> valid_mask;

  [[nodiscard]] std::size_t size() const { return positions.size(); }
  [[nodiscard]] std::size_t valid_count() const;

  /// Builds a fully valid trajectory with kinematics derived from `positions`.
  static Trajectory from_positions(std::vector<Position2D> positions,
                                   double dt = kTimestepSeconds);
};

struct VehicleState {
  Position2D initial_position;
  Vec2 initial_heading{1.0, 0.0};
  double initial_speed{0.0};
  double length{kDefaultVehicleLength};
  double width{kDefaultVehicleWidth};
};

enum class LaneDirection { same = 0, opposite = 1, perpendicular_up = 2, perpendicular_down = 3 };

std::string_view to_string(LaneDirection d);
LaneDirection lane_direction_from_string(std::string_view s);

struct Lane {
  std::vector<Position2D> centerline;
  LaneDirection direction_class{LaneDirection::same};
  int lane_id_from_right{1};
};

struct LaneMap {
  std::vector<Lane> lanes;
  std::optional<Position2D> intersection_center;

  friend bool operator==(const LaneMap&, const LaneMap&);
};

bool operator==(const Lane& a, const Lane& b);

struct Scenario {
  LaneMap map;
  std::vector<VehicleState> vehicles;
  std::vector<Trajectory> trajectories;
  double timestep_seconds{kTimestepSeconds};

  [[nodiscard]] std::size_t vehicle_count() const { return vehicles.size(); }
};

struct Kinematics {
  std::vector<Vec2> headings;
  std::vector<double> speeds;
};

/// Speed is the forward chord length over dt (the last step repeats the
/// previous one). Heading is the normalized chord while moving faster than
/// 1e-3 m/s and is otherwise carried forward. Leading stationary steps take
/// the first moving heading; a trajectory that never moves faces (1,0).
Kinematics derive_kinematics(const std::vector<Position2D>& positions, double dt);

struct Violation {
  std::string field;
  std::string rule;
};

/// Checks every type invariant. Returns an empty list for a well-formed scenario.
std::vector<Violation> validate_scenario(const Scenario& s);

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<Violation> violations);
  [[nodiscard]] const std::vector<Violation>& violations() const { return violations_; }

 private:
  std::vector<Violation> violations_;
};

/// Throws ValidationError when validate_scenario reports anything.
void require_valid(const Scenario& s);

/// Rigid transform applied to every coordinate and heading of the scenario.
Scenario transform_scenario(const Scenario& s, Vec2 rotation_heading, Vec2 translation);

/// Re-expresses the scenario in the ego's initial frame: ego starts at the
/// origin facing +x.
Scenario to_ego_frame(const Scenario& s);

// JSON scenario files. Trajectory headings and speeds are not stored; they
// are re-derived from positions on load.
nlohmann::json lane_map_to_json(const LaneMap& m);
LaneMap lane_map_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const nlohmann::json& j);
Scenario load_scenario(const std::string& path);
void save_scenario(const Scenario& s, const std::string& path);

}  // namespace scenecode
