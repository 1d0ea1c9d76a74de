#include "scenecode/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

namespace scenecode {

namespace {

constexpr double kRoadBehind = 120.0;
constexpr double kRoadAhead = 180.0;
constexpr double kCrossingHalfLength = 120.0;
constexpr double kCenterlineSpacing = 10.0;

struct LaneFrame {
  Vec2 origin;
  Vec2 heading;
};

int lane_count(const MapTemplate& t, LaneDirection d) {
  switch (d) {
    case LaneDirection::same: return t.same_lanes;
    case LaneDirection::opposite: return t.opposite_lanes;
    case LaneDirection::perpendicular_up:
      return t.kind == MapTemplateKind::four_way_intersection ? t.perp_up_lanes : 0;
    case LaneDirection::perpendicular_down:
      return t.kind == MapTemplateKind::four_way_intersection ? t.perp_down_lanes : 0;
  }
  return 0;
}

double road_center_y(const MapTemplate& t, int ego_lane_id) {
  const double w = t.lane_width;
  const double lowest = (1 - ego_lane_id) * w;
  const double highest = (t.same_lanes + t.opposite_lanes - ego_lane_id) * w;
  return 0.5 * (lowest + highest);
}

// Reference point and driving direction of a lane. Stations are measured from
// the reference point.
LaneFrame lane_frame(const MapTemplate& t, int ego_lane_id, LaneDirection d, int id) {
  const double w = t.lane_width;
  switch (d) {
    case LaneDirection::same:
      return {{0.0, (id - ego_lane_id) * w}, {1.0, 0.0}};
    case LaneDirection::opposite: {
      // Opposite lanes sit left of the same-direction lanes; id 1 is their
      // right-most lane, i.e. the one farthest from the road center line.
      const int from_center = t.opposite_lanes - id + 1;
      return {{0.0, (t.same_lanes - ego_lane_id + from_center) * w}, {-1.0, 0.0}};
    }
    case LaneDirection::perpendicular_up: {
      const double xc = t.intersection_ahead;
      const int k = t.perp_up_lanes - id + 1;
      return {{xc + (k - 0.5) * w, road_center_y(t, ego_lane_id)}, {0.0, 1.0}};
    }
    case LaneDirection::perpendicular_down: {
      const double xc = t.intersection_ahead;
      const int k = t.perp_down_lanes - id + 1;
      return {{xc - (k - 0.5) * w, road_center_y(t, ego_lane_id)}, {0.0, -1.0}};
    }
  }
  return {{0.0, 0.0}, {1.0, 0.0}};
}

std::vector<Vec2> straight_centerline(Vec2 origin, Vec2 heading, double behind, double ahead) {
  std::vector<Vec2> pts;
  for (double s = -behind; s <= ahead + 1e-9; s += kCenterlineSpacing) {
    pts.push_back(origin + s * heading);
  }
  return pts;
}

// Distance travelled after `t` seconds under a linear speed ramp.
double travelled(double v0, double v1, double t, double duration) {
  const double a = (v1 - v0) / duration;
  return v0 * t + 0.5 * a * t * t;
}

// A straight run, a circular arc sweeping `sweep` (signed, + = left) with the
// given radius starting at arc length `arc_start`, then a straight run.
Vec2 arc_path_point(double s, double arc_start, double radius, double sweep) {
  if (s <= arc_start || sweep == 0.0) return {s, 0.0};
  const double sign = sweep > 0.0 ? 1.0 : -1.0;
  const double arc_len = radius * std::abs(sweep);
  const double along = std::min(s - arc_start, arc_len);
  const double phi = along / radius;
  Vec2 p{arc_start + radius * std::sin(phi), sign * radius * (1.0 - std::cos(phi))};
  if (s - arc_start > arc_len) {
    const double rest = s - arc_start - arc_len;
    const Vec2 h{std::cos(std::abs(sweep)), sign * std::sin(std::abs(sweep))};
    p = p + rest * h;
  }
  return p;
}

struct ManeuverShape {
  double arc_start{0.0};
  double radius{1.0};
  double sweep{0.0};
};

ManeuverShape pick_shape(TrajectoryType type, double path_length, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double da = std::numbers::pi / 12.0;
  ManeuverShape m;
  m.arc_start = (0.1 + 0.15 * unit(rng)) * path_length;
  const bool left = type == TrajectoryType::left_turn || type == TrajectoryType::left_lane_change;
  const double sign = left ? 1.0 : -1.0;
  if (type == TrajectoryType::left_turn || type == TrajectoryType::right_turn) {
    const double sweep = (70.0 + 25.0 * unit(rng)) * std::numbers::pi / 180.0;
    const double fit = (0.9 * path_length - m.arc_start) / sweep;
    const double preferred = 8.0 + 12.0 * unit(rng);
    m.radius = std::max(std::min(fit, preferred), 1e-3);
    m.sweep = sign * sweep;
  } else {
    // Lane changes end while still angled: the final heading must stay inside
    // [da, 2 da) for the first-vs-last heading rule to see the maneuver.
    const double sweep = da * (1.15 + 0.7 * unit(rng));
    const double arc_len = (0.15 + 0.15 * unit(rng)) * path_length;
    m.radius = arc_len / sweep;
    m.sweep = sign * sweep;
  }
  return m;
}

bool is_left_change(TrajectoryType t) { return t == TrajectoryType::left_lane_change; }
bool is_right_change(TrajectoryType t) { return t == TrajectoryType::right_lane_change; }

std::string vehicle_label(std::size_t i) { return "vehicle " + std::to_string(i); }

}  // namespace

LaneMap build_lane_map(const MapTemplate& t, int ego_lane_id) {
  if (t.same_lanes < 1) throw InvalidSpecError("map template needs at least one same-direction lane");
  if (t.opposite_lanes < 0 || t.perp_up_lanes < 0 || t.perp_down_lanes < 0) {
    throw InvalidSpecError("map template lane counts must be >= 0");
  }
  if (ego_lane_id < 1 || ego_lane_id > t.same_lanes) {
    throw InvalidSpecError("ego lane id outside [1, same_lanes]");
  }
  if (!(t.lane_width > 0.0)) throw InvalidSpecError("lane width must be > 0");

  LaneMap m;
  for (LaneDirection d : {LaneDirection::same, LaneDirection::opposite}) {
    for (int id = 1; id <= lane_count(t, d); ++id) {
      const LaneFrame f = lane_frame(t, ego_lane_id, d, id);
      const bool forward = d == LaneDirection::same;
      m.lanes.push_back({straight_centerline(f.origin, f.heading, forward ? kRoadBehind : kRoadAhead,
                                             forward ? kRoadAhead : kRoadBehind),
                         d, id});
    }
  }
  if (t.kind == MapTemplateKind::four_way_intersection) {
    if (t.perp_up_lanes + t.perp_down_lanes < 1) {
      throw InvalidSpecError("an intersection needs at least one crossing lane");
    }
    for (LaneDirection d : {LaneDirection::perpendicular_up, LaneDirection::perpendicular_down}) {
      for (int id = 1; id <= lane_count(t, d); ++id) {
        const LaneFrame f = lane_frame(t, ego_lane_id, d, id);
        m.lanes.push_back(
            {straight_centerline(f.origin, f.heading, kCrossingHalfLength, kCrossingHalfLength), d, id});
      }
    }
    m.intersection_center = Vec2{t.intersection_ahead, road_center_y(t, ego_lane_id)};
  }
  if (m.lanes.size() > kMaxLanes) throw InvalidSpecError("template exceeds 384 lanes");
  return m;
}

Scenario synth_scenario(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.vehicles.empty() || spec.vehicles.size() > kMaxVehicles) {
    throw InvalidSpecError("vehicle count must be in [1, 32]");
  }
  const VehicleSpec& ego_spec = spec.vehicles[0];
  if (ego_spec.lane_direction != LaneDirection::same || ego_spec.station != 0.0) {
    throw InvalidSpecError("the ego must start at station 0 of a same-direction lane");
  }

  Scenario s;
  s.map = build_lane_map(spec.map, ego_spec.lane_id);

  CodecConfig cfg;
  cfg.lane_width = spec.map.lane_width;
  const double duration = (kTimesteps - 1) * kTimestepSeconds;

  for (std::size_t i = 0; i < spec.vehicles.size(); ++i) {
    const VehicleSpec& v = spec.vehicles[i];
    const int count = lane_count(spec.map, v.lane_direction);
    if (v.lane_id < 1 || v.lane_id > count) {
      throw InvalidSpecError(vehicle_label(i) + ": lane " + std::string(to_string(v.lane_direction)) +
                             " #" + std::to_string(v.lane_id) + " does not exist in the map");
    }
    if (is_left_change(v.type) && v.lane_id == count) {
      throw InvalidSpecError(vehicle_label(i) + ": cannot change lanes to the left from the far left lane");
    }
    if (is_right_change(v.type) && v.lane_id == 1) {
      throw InvalidSpecError(vehicle_label(i) +
                             ": cannot change lanes to the right from the far right lane");
    }
    if (!(v.length > 0.0 && v.width > 0.0)) {
      throw InvalidSpecError(vehicle_label(i) + ": vehicle extents must be > 0");
    }
    if (v.type != TrajectoryType::stop && (v.initial_speed < 0.0 || v.final_speed < 0.0)) {
      throw InvalidSpecError(vehicle_label(i) + ": speeds must be >= 0");
    }

    const LaneFrame frame = lane_frame(spec.map, ego_spec.lane_id, v.lane_direction, v.lane_id);
    const Vec2 start = frame.origin + v.station * frame.heading;

    std::vector<Vec2> pts(kTimesteps, start);
    if (v.type != TrajectoryType::stop) {
      const double path_length = travelled(v.initial_speed, v.final_speed, duration, duration);
      ManeuverShape shape;
      if (v.type != TrajectoryType::straight) {
        std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + i + 1);
        shape = pick_shape(v.type, path_length, rng);
      }
      for (std::size_t t = 0; t < kTimesteps; ++t) {
        const double dist = travelled(v.initial_speed, v.final_speed, t * kTimestepSeconds, duration);
        const Vec2 local = arc_path_point(dist, shape.arc_start, shape.radius, shape.sweep);
        pts[t] = start + rotate(local, frame.heading);
      }
    }

    Trajectory traj = Trajectory::from_positions(std::move(pts));
    const TrajectoryType got = classify_trajectory(traj, cfg);
    if (got != v.type) {
      throw InvalidSpecError(vehicle_label(i) + ": requested " + std::string(to_string(v.type)) +
                             " cannot be realized at these speeds (classified as " +
                             std::string(to_string(got)) + ")");
    }

    VehicleState state;
    state.initial_position = start;
    state.initial_heading = frame.heading;
    state.initial_speed = v.type == TrajectoryType::stop ? 0.0 : v.initial_speed;
    state.length = v.length;
    state.width = v.width;
    s.vehicles.push_back(state);
    s.trajectories.push_back(std::move(traj));
  }
  return s;
}

nlohmann::json synth_spec_to_json(const SynthSpec& s) {
  nlohmann::json vehicles = nlohmann::json::array();
  for (const VehicleSpec& v : s.vehicles) {
    vehicles.push_back({{"type", std::string(to_string(v.type))},
                        {"lane_direction", std::string(to_string(v.lane_direction))},
                        {"lane_id", v.lane_id},
                        {"station", v.station},
                        {"initial_speed", v.initial_speed},
                        {"final_speed", v.final_speed},
                        {"length", v.length},
                        {"width", v.width}});
  }
  return {{"map",
           {{"template", s.map.kind == MapTemplateKind::straight_road ? "straight-road"
                                                                      : "four-way-intersection"},
            {"same_lanes", s.map.same_lanes},
            {"opposite_lanes", s.map.opposite_lanes},
            {"perp_up_lanes", s.map.perp_up_lanes},
            {"perp_down_lanes", s.map.perp_down_lanes},
            {"intersection_ahead", s.map.intersection_ahead},
            {"lane_width", s.map.lane_width}}},
          {"vehicles", std::move(vehicles)}};
}

SynthSpec synth_spec_from_json(const nlohmann::json& j) {
  SynthSpec s;
  const auto& m = j.at("map");
  const std::string kind = m.value("template", "straight-road");
  if (kind == "straight-road") s.map.kind = MapTemplateKind::straight_road;
  else if (kind == "four-way-intersection") s.map.kind = MapTemplateKind::four_way_intersection;
  else throw InvalidSpecError("unknown map template '" + kind + "'");
  s.map.same_lanes = m.value("same_lanes", s.map.same_lanes);
  s.map.opposite_lanes = m.value("opposite_lanes", s.map.opposite_lanes);
  s.map.perp_up_lanes = m.value("perp_up_lanes", s.map.perp_up_lanes);
  s.map.perp_down_lanes = m.value("perp_down_lanes", s.map.perp_down_lanes);
  s.map.intersection_ahead = m.value("intersection_ahead", s.map.intersection_ahead);
  s.map.lane_width = m.value("lane_width", s.map.lane_width);
  for (const auto& vj : j.at("vehicles")) {
    VehicleSpec v;
    v.type = trajectory_type_from_string(vj.at("type").get<std::string>());
    v.lane_direction = lane_direction_from_string(vj.value("lane_direction", std::string("same")));
    v.lane_id = vj.value("lane_id", 1);
    v.station = vj.value("station", 0.0);
    v.initial_speed = vj.value("initial_speed", 10.0);
    v.final_speed = vj.value("final_speed", v.initial_speed);
    v.length = vj.value("length", kDefaultVehicleLength);
    v.width = vj.value("width", kDefaultVehicleWidth);
    s.vehicles.push_back(v);
  }
  return s;
}

namespace {

// Speeds at bin centers keep codes stable under small numeric noise.
double bin_center_speed(int bin) { return 2.5 * bin + 1.25; }

std::pair<double, double> pick_speeds(TrajectoryType type, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> bin(2, 6);
  std::uniform_int_distribution<int> delta(-1, 1);
  switch (type) {
    case TrajectoryType::stop: return {0.0, 0.0};
    case TrajectoryType::left_lane_change:
    case TrajectoryType::right_lane_change: {
      const int b0 = std::uniform_int_distribution<int>(3, 7)(rng);
      return {bin_center_speed(b0), bin_center_speed(std::clamp(b0 + delta(rng), 3, 7))};
    }
    case TrajectoryType::left_turn:
    case TrajectoryType::right_turn: {
      const int b0 = std::uniform_int_distribution<int>(2, 5)(rng);
      return {bin_center_speed(b0), bin_center_speed(std::clamp(b0 - 1, 1, 5))};
    }
    case TrajectoryType::straight: {
      const int b0 = bin(rng);
      return {bin_center_speed(b0), bin_center_speed(std::clamp(b0 + delta(rng), 1, 7))};
    }
  }
  return {10.0, 10.0};
}

}  // namespace

SynthSpec random_single_type_spec(TrajectoryType type, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0xA5A5A5A5ULL);
  SynthSpec s;
  s.map.kind = (type == TrajectoryType::left_turn || type == TrajectoryType::right_turn)
                   ? MapTemplateKind::four_way_intersection
                   : MapTemplateKind::straight_road;
  s.map.same_lanes = std::uniform_int_distribution<int>(2, 4)(rng);
  s.map.opposite_lanes = std::uniform_int_distribution<int>(0, 2)(rng);
  VehicleSpec v;
  v.type = type;
  int lo = 1;
  int hi = s.map.same_lanes;
  if (type == TrajectoryType::left_lane_change) hi = s.map.same_lanes - 1;
  if (type == TrajectoryType::right_lane_change) lo = 2;
  v.lane_id = std::uniform_int_distribution<int>(lo, hi)(rng);
  std::tie(v.initial_speed, v.final_speed) = pick_speeds(type, rng);
  s.vehicles.push_back(v);
  return s;
}

SynthSpec random_synth_spec(std::uint64_t seed, int max_vehicles) {
  std::mt19937_64 rng(seed * 0xD1B54A32D192ED03ULL + 7);
  auto uniform_int = [&rng](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto chance = [&rng](double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; };

  SynthSpec s;
  const bool intersection = chance(0.4);
  s.map.kind = intersection ? MapTemplateKind::four_way_intersection : MapTemplateKind::straight_road;
  s.map.same_lanes = uniform_int(1, 3);
  s.map.opposite_lanes = uniform_int(intersection ? 1 : 0, 2);
  s.map.perp_up_lanes = uniform_int(1, 2);
  s.map.perp_down_lanes = uniform_int(1, 2);
  s.map.intersection_ahead = chance(0.5) ? 22.5 : 37.5;

  auto allowed_types = [&](LaneDirection d, int id) {
    std::vector<TrajectoryType> types{TrajectoryType::straight, TrajectoryType::straight,
                                      TrajectoryType::stop};
    const int count = lane_count(s.map, d);
    if (id < count) types.push_back(TrajectoryType::left_lane_change);
    if (id > 1) types.push_back(TrajectoryType::right_lane_change);
    if (intersection) {
      types.push_back(TrajectoryType::left_turn);
      types.push_back(TrajectoryType::right_turn);
    }
    return types;
  };

  VehicleSpec ego;
  ego.lane_id = uniform_int(1, s.map.same_lanes);
  {
    auto types = allowed_types(LaneDirection::same, ego.lane_id);
    ego.type = types[uniform_int(0, static_cast<int>(types.size()) - 1)];
    std::tie(ego.initial_speed, ego.final_speed) = pick_speeds(ego.type, rng);
  }
  s.vehicles.push_back(ego);

  const int others = uniform_int(0, std::max(0, max_vehicles - 1));
  std::set<std::pair<int, int>> occupied{{0, ego.lane_id}};
  for (int k = 0; k < others; ++k) {
    VehicleSpec v;
    std::vector<LaneDirection> dirs{LaneDirection::same};
    if (s.map.opposite_lanes > 0) dirs.push_back(LaneDirection::opposite);
    if (intersection) {
      dirs.push_back(LaneDirection::perpendicular_up);
      dirs.push_back(LaneDirection::perpendicular_down);
    }
    v.lane_direction = dirs[uniform_int(0, static_cast<int>(dirs.size()) - 1)];
    v.lane_id = uniform_int(1, lane_count(s.map, v.lane_direction));
    const int dir_index = static_cast<int>(v.lane_direction);
    // One extra vehicle per lane keeps the synthetic traffic collision-free.
    if (!occupied.insert({dir_index, v.lane_id}).second) continue;

    const bool crossing = v.lane_direction == LaneDirection::perpendicular_up ||
                          v.lane_direction == LaneDirection::perpendicular_down;
    if (crossing) {
      v.station = -static_cast<double>(uniform_int(15, 45));
    } else {
      const double magnitude = uniform_int(10, 45);
      v.station = chance(0.5) ? magnitude : -magnitude;
    }
    auto types = allowed_types(v.lane_direction, v.lane_id);
    v.type = types[uniform_int(0, static_cast<int>(types.size()) - 1)];
    std::tie(v.initial_speed, v.final_speed) = pick_speeds(v.type, rng);
    s.vehicles.push_back(v);
  }
  return s;
}

std::vector<Scenario> synth_dataset(std::size_t count, std::uint64_t seed, int max_vehicles) {
  std::vector<Scenario> out;
  std::vector<CodeBundle> seen;
  const CodecConfig cfg;
  for (std::uint64_t attempt = 0; out.size() < count; ++attempt) {
    if (attempt > 1000 * (count + 1)) {
      throw std::runtime_error("synth_dataset: could not find enough distinct scenarios");
    }
    const std::uint64_t s = seed * 1000003ULL + attempt;
    Scenario sc;
    try {
      sc = synth_scenario(random_synth_spec(s, max_vehicles), s);
    } catch (const InvalidSpecError&) {
      continue;
    }
    const CodeBundle b = extract_codes(sc, cfg);
    if (std::find(seen.begin(), seen.end(), b) != seen.end()) continue;
    bool agents_distinct = true;
    for (std::size_t i = 0; i < b.vehicle_count() && agents_distinct; ++i) {
      for (std::size_t j = i + 1; j < b.vehicle_count(); ++j) {
        if (b.vehicle_codes[i] == b.vehicle_codes[j] &&
            b.interaction_codes[i] == b.interaction_codes[j]) {
          agents_distinct = false;
          break;
        }
      }
    }
    if (!agents_distinct) continue;
    seen.push_back(b);
    out.push_back(std::move(sc));
  }
  return out;
}

}  // namespace scenecode
