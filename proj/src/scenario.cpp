#include "scenecode/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace scenecode {

namespace {

constexpr double kMovingSpeed = 1e-3;
constexpr double kUnitTolerance = 1e-6;

bool finite(Vec2 v) { return std::isfinite(v.x) && std::isfinite(v.y); }

nlohmann::json point_json(Vec2 p) { return nlohmann::json::array({p.x, p.y}); }

Vec2 point_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) {
    throw InvalidInputError("expected a [x, y] pair, got " + j.dump());
  }
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

}  // namespace

std::size_t Trajectory::valid_count() const {
  return static_cast<std::size_t>(std::count(valid_mask.begin(), valid_mask.end(), true));
}

Trajectory Trajectory::from_positions(std::vector<Position2D> positions, double dt) {
  Kinematics k = derive_kinematics(positions, dt);
  Trajectory t;
  t.valid_mask.assign(positions.size(), true);
  t.positions = std::move(positions);
  t.headings = std::move(k.headings);
  t.speeds = std::move(k.speeds);
  return t;
}

std::string_view to_string(LaneDirection d) {
  switch (d) {
    case LaneDirection::same: return "same";
    case LaneDirection::opposite: return "opposite";
    case LaneDirection::perpendicular_up: return "perpendicular_up";
    case LaneDirection::perpendicular_down: return "perpendicular_down";
  }
  return "same";
}

LaneDirection lane_direction_from_string(std::string_view s) {
  if (s == "same") return LaneDirection::same;
  if (s == "opposite") return LaneDirection::opposite;
  if (s == "perpendicular_up") return LaneDirection::perpendicular_up;
  if (s == "perpendicular_down") return LaneDirection::perpendicular_down;
  throw InvalidInputError("unknown lane direction '" + std::string(s) + "'");
}

bool operator==(const Lane& a, const Lane& b) {
  return a.centerline == b.centerline && a.direction_class == b.direction_class &&
         a.lane_id_from_right == b.lane_id_from_right;
}

bool operator==(const LaneMap& a, const LaneMap& b) {
  return a.lanes == b.lanes && a.intersection_center == b.intersection_center;
}

Kinematics derive_kinematics(const std::vector<Position2D>& positions, double dt) {
  if (positions.size() < 2) {
    throw InvalidInputError("derive_kinematics needs at least 2 positions");
  }
  if (!(dt > 0.0)) {
    throw InvalidInputError("derive_kinematics needs dt > 0");
  }
  const std::size_t n = positions.size();
  Kinematics k;
  k.speeds.resize(n);
  k.headings.resize(n);
  std::vector<Vec2> chords(n - 1);
  for (std::size_t t = 0; t + 1 < n; ++t) {
    chords[t] = positions[t + 1] - positions[t];
    k.speeds[t] = chords[t].norm() / dt;
  }
  k.speeds[n - 1] = k.speeds[n - 2];

  // Leading stationary steps take the first moving heading.
  Vec2 carried{1.0, 0.0};
  for (std::size_t t = 0; t + 1 < n; ++t) {
    if (k.speeds[t] > kMovingSpeed) {
      carried = (1.0 / chords[t].norm()) * chords[t];
      break;
    }
  }
  for (std::size_t t = 0; t + 1 < n; ++t) {
    if (k.speeds[t] > kMovingSpeed) {
      carried = (1.0 / chords[t].norm()) * chords[t];
    }
    k.headings[t] = carried;
  }
  k.headings[n - 1] = k.headings[n - 2];
  return k;
}

std::vector<Violation> validate_scenario(const Scenario& s) {
  std::vector<Violation> out;
  auto add = [&out](std::string field, std::string rule) {
    out.push_back({std::move(field), std::move(rule)});
  };

  if (s.map.lanes.size() > kMaxLanes) add("map.lanes", "lane count > 384");
  for (std::size_t i = 0; i < s.map.lanes.size(); ++i) {
    const Lane& lane = s.map.lanes[i];
    const std::string f = "map.lanes[" + std::to_string(i) + "]";
    if (lane.centerline.size() < 2) add(f + ".centerline", "fewer than 2 points");
    for (std::size_t p = 0; p < lane.centerline.size(); ++p) {
      if (!finite(lane.centerline[p])) add(f + ".centerline", "non-finite point");
      if (p > 0 && lane.centerline[p] == lane.centerline[p - 1]) {
        add(f + ".centerline", "consecutive duplicate points");
      }
    }
    if (lane.lane_id_from_right < 1) add(f + ".lane_id", "lane id < 1");
  }
  if (s.map.intersection_center && !finite(*s.map.intersection_center)) {
    add("map.intersection", "non-finite center");
  }

  if (s.vehicles.empty()) add("vehicles", "vehicle count < 1");
  if (s.vehicles.size() > kMaxVehicles) add("vehicles", "vehicle count > 32");
  if (s.vehicles.size() != s.trajectories.size()) {
    add("trajectories", "trajectory count != vehicle count");
  }
  if (std::abs(s.timestep_seconds - kTimestepSeconds) > 1e-12) {
    add("timestep_seconds", "timestep != 0.1 s");
  }

  for (std::size_t i = 0; i < s.vehicles.size(); ++i) {
    const VehicleState& v = s.vehicles[i];
    const std::string f = "vehicles[" + std::to_string(i) + "]";
    if (!finite(v.initial_position)) add(f + ".pos", "non-finite position");
    if (std::abs(v.initial_heading.norm() - 1.0) > kUnitTolerance) {
      add(f + ".heading", "heading not unit length");
    }
    if (!(v.initial_speed >= 0.0)) add(f + ".speed", "speed < 0");
    if (!(v.length > 0.0)) add(f + ".length", "length <= 0");
    if (!(v.width > 0.0)) add(f + ".width", "width <= 0");
  }

  for (std::size_t i = 0; i < s.trajectories.size(); ++i) {
    const Trajectory& t = s.trajectories[i];
    const std::string f = "trajectories[" + std::to_string(i) + "]";
    if (t.positions.size() != kTimesteps) add(f, "T != 50");
    if (t.headings.size() != t.positions.size() || t.speeds.size() != t.positions.size() ||
        t.valid_mask.size() != t.positions.size()) {
      add(f, "sequence lengths differ");
      continue;
    }
    for (std::size_t k = 0; k < t.positions.size(); ++k) {
      if (!t.valid_mask[k]) continue;
      if (!finite(t.positions[k])) {
        add(f + ".positions", "non-finite position at t=" + std::to_string(k));
      }
      if (std::abs(t.headings[k].norm() - 1.0) > kUnitTolerance) {
        add(f + ".headings", "heading not unit length at t=" + std::to_string(k));
      }
      if (!(t.speeds[k] >= 0.0)) add(f + ".speeds", "speed < 0 at t=" + std::to_string(k));
    }
  }
  return out;
}

namespace {

std::string describe(const std::vector<Violation>& v) {
  std::ostringstream os;
  os << "invalid scenario:";
  for (const auto& item : v) os << " [" << item.field << ": " << item.rule << "]";
  return os.str();
}

}  // namespace

ValidationError::ValidationError(std::vector<Violation> violations)
    : std::runtime_error(describe(violations)), violations_(std::move(violations)) {}

void require_valid(const Scenario& s) {
  auto v = validate_scenario(s);
  if (!v.empty()) throw ValidationError(std::move(v));
}

Scenario transform_scenario(const Scenario& s, Vec2 rotation_heading, Vec2 translation) {
  auto xf = [&](Vec2 p) { return rotate(p, rotation_heading) + translation; };
  Scenario out = s;
  for (Lane& lane : out.map.lanes) {
    for (Vec2& p : lane.centerline) p = xf(p);
  }
  if (out.map.intersection_center) out.map.intersection_center = xf(*out.map.intersection_center);
  for (VehicleState& v : out.vehicles) {
    v.initial_position = xf(v.initial_position);
    v.initial_heading = rotate(v.initial_heading, rotation_heading);
  }
  for (Trajectory& t : out.trajectories) {
    for (Vec2& p : t.positions) p = xf(p);
    for (Vec2& h : t.headings) h = rotate(h, rotation_heading);
  }
  return out;
}

Scenario to_ego_frame(const Scenario& s) {
  if (s.vehicles.empty()) throw InvalidInputError("scenario has no ego vehicle");
  const Vec2 origin = s.vehicles[0].initial_position;
  const Vec2 h = s.vehicles[0].initial_heading;
  // Inverse rotation: heading (h.x, -h.y).
  const Vec2 inverse{h.x, -h.y};
  return transform_scenario(s, inverse, rotate(Vec2{-origin.x, -origin.y}, inverse));
}

nlohmann::json lane_map_to_json(const LaneMap& m) {
  nlohmann::json lanes = nlohmann::json::array();
  for (const Lane& lane : m.lanes) {
    nlohmann::json cl = nlohmann::json::array();
    for (Vec2 p : lane.centerline) cl.push_back(point_json(p));
    lanes.push_back({{"centerline", std::move(cl)},
                     {"direction", std::string(to_string(lane.direction_class))},
                     {"lane_id", lane.lane_id_from_right}});
  }
  nlohmann::json j;
  j["lanes"] = std::move(lanes);
  j["intersection"] =
      m.intersection_center ? point_json(*m.intersection_center) : nlohmann::json(nullptr);
  return j;
}

LaneMap lane_map_from_json(const nlohmann::json& j) {
  LaneMap m;
  for (const auto& lj : j.at("lanes")) {
    Lane lane;
    for (const auto& p : lj.at("centerline")) lane.centerline.push_back(point_from_json(p));
    lane.direction_class = lane_direction_from_string(lj.at("direction").get<std::string>());
    lane.lane_id_from_right = lj.at("lane_id").get<int>();
    m.lanes.push_back(std::move(lane));
  }
  if (j.contains("intersection") && !j.at("intersection").is_null()) {
    m.intersection_center = point_from_json(j.at("intersection"));
  }
  return m;
}

nlohmann::json scenario_to_json(const Scenario& s) {
  nlohmann::json vehicles = nlohmann::json::array();
  for (const VehicleState& v : s.vehicles) {
    vehicles.push_back({{"pos", point_json(v.initial_position)},
                        {"heading", point_json(v.initial_heading)},
                        {"speed", v.initial_speed},
                        {"length", v.length},
                        {"width", v.width}});
  }
  nlohmann::json trajectories = nlohmann::json::array();
  nlohmann::json valid = nlohmann::json::array();
  bool any_invalid = false;
  for (const Trajectory& t : s.trajectories) {
    nlohmann::json pts = nlohmann::json::array();
    for (Vec2 p : t.positions) pts.push_back(point_json(p));
    trajectories.push_back(std::move(pts));
    nlohmann::json mask = nlohmann::json::array();
    for (bool b : t.valid_mask) {
      mask.push_back(b);
      any_invalid = any_invalid || !b;
    }
    valid.push_back(std::move(mask));
  }
  nlohmann::json j;
  j["map"] = lane_map_to_json(s.map);
  j["vehicles"] = std::move(vehicles);
  j["trajectories"] = std::move(trajectories);
  if (any_invalid) j["valid"] = std::move(valid);
  return j;
}

Scenario scenario_from_json(const nlohmann::json& j) {
  Scenario s;
  s.map = lane_map_from_json(j.at("map"));
  for (const auto& vj : j.at("vehicles")) {
    VehicleState v;
    v.initial_position = point_from_json(vj.at("pos"));
    v.initial_heading = point_from_json(vj.at("heading"));
    v.initial_speed = vj.at("speed").get<double>();
    v.length = vj.value("length", kDefaultVehicleLength);
    v.width = vj.value("width", kDefaultVehicleWidth);
    s.vehicles.push_back(v);
  }
  const auto& tj = j.at("trajectories");
  for (std::size_t i = 0; i < tj.size(); ++i) {
    std::vector<Vec2> pts;
    for (const auto& p : tj[i]) pts.push_back(point_from_json(p));
    Trajectory t;
    if (pts.size() >= 2) {
      t = Trajectory::from_positions(std::move(pts));
    } else {
      t.positions = std::move(pts);
      t.headings.assign(t.positions.size(), Vec2{1.0, 0.0});
      t.speeds.assign(t.positions.size(), 0.0);
      t.valid_mask.assign(t.positions.size(), true);
    }
    if (j.contains("valid")) {
      const auto& mask = j.at("valid").at(i);
      if (mask.size() != t.positions.size()) {
        throw InvalidInputError("valid mask length differs from trajectory " + std::to_string(i));
      }
      for (std::size_t k = 0; k < mask.size(); ++k) t.valid_mask[k] = mask[k].get<bool>();
    }
    s.trajectories.push_back(std::move(t));
  }
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInputError("malformed JSON in '" + path + "': " + e.what());
  }
  try {
    return scenario_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInputError("bad scenario schema in '" + path + "': " + e.what());
  }
}

void save_scenario(const Scenario& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write scenario file '" + path + "'");
  out << scenario_to_json(s).dump(1) << '\n';
}

}  // namespace scenecode
