#include "scenecode/codec.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace scenecode {

namespace {

// Bins are computed on quantities derived through rotations, so values that
// land exactly on a bin edge must not flip on the last ulp.
constexpr double kBinSlack = 1e-9;

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

double point_polyline_distance(Vec2 p, const std::vector<Vec2>& line) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    best = std::min(best, point_segment_distance(p, line[i], line[i + 1]));
  }
  return best;
}

std::vector<std::size_t> valid_indices(const Trajectory& t) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i < t.valid_mask.size() && t.valid_mask[i]) idx.push_back(i);
  }
  return idx;
}

}  // namespace

void CodecConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& rule) {
    throw InvalidInputError("codec config field '" + field + "': " + rule);
  };
  if (!(interaction_distance_gap > 0.0)) fail("interaction_distance_gap", "must be > 0");
  if (interaction_areas != 4 && interaction_areas != 6 && interaction_areas != 8) {
    fail("interaction_areas", "must be 4, 6 or 8");
  }
  if (!(vehicle_distance_gap > 0.0)) fail("vehicle_distance_gap", "must be > 0");
  if (vehicle_distance_max_bin < 0) fail("vehicle_distance_max_bin", "must be >= 0");
  if (!(speed_gap > 0.0)) fail("speed_gap", "must be > 0");
  if (speed_max_bin < 0) fail("speed_max_bin", "must be >= 0");
  if (sample_count_interaction != kInteractionSamples) {
    fail("sample_count_interaction", "only 5 samples are supported");
  }
  if (sample_count_speed != kSpeedSamples) fail("sample_count_speed", "only 6 samples are supported");
  if (!(lane_width > 0.0)) fail("lane_width", "must be > 0");
  if (!(angle_threshold > 0.0)) fail("angle_threshold_delta_a", "must be > 0");
  if (!(max_invalid_fraction >= 0.0 && max_invalid_fraction <= 1.0)) {
    fail("max_invalid_fraction", "must be in [0, 1]");
  }
}

nlohmann::json codec_config_to_json(const CodecConfig& c) {
  return {{"interaction_distance_gap", c.interaction_distance_gap},
          {"interaction_areas", c.interaction_areas},
          {"vehicle_distance_gap", c.vehicle_distance_gap},
          {"vehicle_distance_max_bin", c.vehicle_distance_max_bin},
          {"speed_gap", c.speed_gap},
          {"speed_max_bin", c.speed_max_bin},
          {"sample_count_interaction", c.sample_count_interaction},
          {"sample_count_speed", c.sample_count_speed},
          {"lane_width", c.lane_width},
          {"angle_threshold_delta_a", c.angle_threshold},
          {"max_invalid_fraction", c.max_invalid_fraction}};
}

CodecConfig codec_config_from_json(const nlohmann::json& j) {
  CodecConfig c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "interaction_distance_gap") c.interaction_distance_gap = value.get<double>();
      else if (key == "interaction_areas") c.interaction_areas = value.get<int>();
      else if (key == "vehicle_distance_gap") c.vehicle_distance_gap = value.get<double>();
      else if (key == "vehicle_distance_max_bin") c.vehicle_distance_max_bin = value.get<int>();
      else if (key == "speed_gap") c.speed_gap = value.get<double>();
      else if (key == "speed_max_bin") c.speed_max_bin = value.get<int>();
      else if (key == "sample_count_interaction") c.sample_count_interaction = value.get<int>();
      else if (key == "sample_count_speed") c.sample_count_speed = value.get<int>();
      else if (key == "lane_width") c.lane_width = value.get<double>();
      else if (key == "angle_threshold_delta_a") c.angle_threshold = value.get<double>();
      else if (key == "max_invalid_fraction") c.max_invalid_fraction = value.get<double>();
      else throw InvalidInputError("unknown codec config field '" + key + "'");
    } catch (const nlohmann::json::exception&) {
      throw InvalidInputError("codec config field '" + key + "' has the wrong type");
    }
  }
  c.validate();
  return c;
}

std::string_view to_string(TrajectoryType t) {
  switch (t) {
    case TrajectoryType::stop: return "stop";
    case TrajectoryType::straight: return "straight";
    case TrajectoryType::left_turn: return "left-turn";
    case TrajectoryType::right_turn: return "right-turn";
    case TrajectoryType::left_lane_change: return "left-change-lane";
    case TrajectoryType::right_lane_change: return "right-change-lane";
  }
  return "straight";
}

TrajectoryType trajectory_type_from_string(std::string_view s) {
  for (int i = 0; i < kTrajectoryTypeCount; ++i) {
    auto t = static_cast<TrajectoryType>(i);
    if (s == to_string(t)) return t;
  }
  if (s == "left-lane-change") return TrajectoryType::left_lane_change;
  if (s == "right-lane-change") return TrajectoryType::right_lane_change;
  throw InvalidInputError("unknown trajectory type '" + std::string(s) + "'");
}

TrajectoryType trajectory_type_from_int(int v) {
  if (v < 0 || v >= kTrajectoryTypeCount) {
    throw InvalidInputError("trajectory type index " + std::to_string(v) + " out of range [0,5]");
  }
  return static_cast<TrajectoryType>(v);
}

std::array<int, 2 * kInteractionSamples> InteractionCode::flatten() const {
  std::array<int, 2 * kInteractionSamples> out{};
  std::copy(distance_bins.begin(), distance_bins.end(), out.begin());
  std::copy(direction_sectors.begin(), direction_sectors.end(), out.begin() + kInteractionSamples);
  return out;
}

std::array<int, kVehicleCodeLength> VehicleCode::flatten() const {
  std::array<int, kVehicleCodeLength> out{};
  out[0] = pos_sector;
  out[1] = distance_bin;
  out[2] = direction_class;
  std::copy(speed_bins.begin(), speed_bins.end(), out.begin() + 3);
  out[9] = static_cast<int>(action);
  return out;
}

VehicleCode VehicleCode::from_flat(const std::array<int, kVehicleCodeLength>& v) {
  VehicleCode c;
  c.pos_sector = v[0];
  c.distance_bin = v[1];
  c.direction_class = v[2];
  std::copy(v.begin() + 3, v.begin() + 9, c.speed_bins.begin());
  c.action = trajectory_type_from_int(v[9]);
  return c;
}

std::array<int, kMapCodeLength> MapCode::flatten() const {
  return {same_dir_lanes,  opposite_dir_lanes,       perp_up_lanes,
          perp_down_lanes, dist_to_intersection_bin, ego_lane_id};
}

MapCode MapCode::from_flat(const std::array<int, kMapCodeLength>& v) {
  return {v[0], v[1], v[2], v[3], v[4], v[5]};
}

std::vector<std::string> validate_bundle(const CodeBundle& b, int interaction_areas) {
  std::vector<std::string> out;
  const std::size_t n = b.vehicle_codes.size();
  if (n != b.interaction_codes.size()) out.push_back("vehicle and interaction code counts differ");
  if (n < 1 || n > kMaxVehicles) out.push_back("vehicle count outside [1,32]");

  const MapCode& m = b.map_code;
  if (m.same_dir_lanes < 1) out.push_back("map: same_dir_lanes < 1");
  if (m.opposite_dir_lanes < 0 || m.perp_up_lanes < 0 || m.perp_down_lanes < 0) {
    out.push_back("map: negative lane count");
  }
  if (m.dist_to_intersection_bin < -1 || m.dist_to_intersection_bin > kIntersectionDistanceMaxBin) {
    out.push_back("map: dist_to_intersection_bin outside {-1,0,1,2,3}");
  }
  if (m.ego_lane_id < 1 || m.ego_lane_id > m.same_dir_lanes) {
    out.push_back("map: ego_lane_id outside [1, same_dir_lanes]");
  }

  for (std::size_t i = 0; i < n; ++i) {
    const VehicleCode& v = b.vehicle_codes[i];
    const std::string f = "V" + std::to_string(i + 1) + ": ";
    if (i == 0) {
      if (v.pos_sector != -1 || v.distance_bin != 0 || v.direction_class != 0) {
        out.push_back(f + "ego must have pos -1, distance 0, direction 0");
      }
    } else if (v.pos_sector < 0 || v.pos_sector >= kVehiclePositionAreas) {
      out.push_back(f + "pos outside [0,5]");
    }
    if (v.distance_bin < 0 || v.distance_bin > 3) out.push_back(f + "distance outside [0,3]");
    if (v.direction_class < 0 || v.direction_class >= kDirectionClasses) {
      out.push_back(f + "direction outside [0,3]");
    }
    for (int s : v.speed_bins) {
      if (s < 0 || s > 8) out.push_back(f + "speed outside [0,8]");
    }
    const int a = static_cast<int>(v.action);
    if (a < 0 || a >= kTrajectoryTypeCount) out.push_back(f + "action outside [0,5]");
  }
  for (std::size_t i = 0; i < b.interaction_codes.size(); ++i) {
    const InteractionCode& c = b.interaction_codes[i];
    const std::string f = "I" + std::to_string(i + 1) + ": ";
    for (int k = 0; k < kInteractionSamples; ++k) {
      if (c.distance_bins[k] < 0 || c.distance_bins[k] > kInteractionDistanceMaxBin) {
        out.push_back(f + "distance outside [0,5]");
      }
      if (c.direction_sectors[k] < 0 || c.direction_sectors[k] >= interaction_areas) {
        out.push_back(f + "sector outside [0, areas-1]");
      }
    }
    if (i == 0 && c != InteractionCode{}) out.push_back(f + "ego interaction code must be zero");
  }
  return out;
}

int sector_of(Vec2 relative_position, Vec2 heading, int areas) {
  if (areas != 4 && areas != 6 && areas != 8) {
    throw InvalidInputError("areas must be 4, 6 or 8");
  }
  if (relative_position.norm() == 0.0) {
    throw DegenerateInputError("sector_of: zero-length relative position");
  }
  const Vec2 local = to_frame(relative_position, heading);
  const double bearing = std::atan2(local.y, local.x) * 180.0 / std::numbers::pi;
  const double width = 360.0 / areas;
  // Counter-clockwise wedge index with wedge 0 centered on the heading.
  const auto ccw = static_cast<int>(std::floor((bearing + width / 2.0) / width + kBinSlack));
  const int wrapped = ((ccw % areas) + areas) % areas;
  return (areas - wrapped) % areas;
}

int distance_bin(double d, double gap, int max_bin) {
  if (!(gap > 0.0)) throw InvalidInputError("distance_bin: gap must be > 0");
  const auto bin = static_cast<int>(std::floor(std::max(d, 0.0) / gap + kBinSlack));
  return std::min(bin, max_bin);
}

int speed_bin(double v, double gap, int max_bin) { return distance_bin(v, gap, max_bin); }

double heading_change(const Trajectory& traj) {
  const auto idx = valid_indices(traj);
  if (idx.size() < 2) return 0.0;
  const Vec2 h0 = traj.headings[idx.front()];
  const Vec2 h1 = traj.headings[idx.back()];
  return std::atan2(cross(h0, h1), dot(h0, h1));
}

double lateral_displacement(const Trajectory& traj) {
  const auto idx = valid_indices(traj);
  if (idx.size() < 2) return 0.0;
  const Vec2 h0 = traj.headings[idx.front()];
  const Vec2 disp = traj.positions[idx.back()] - traj.positions[idx.front()];
  return (disp - dot(disp, h0) * h0).norm();
}

Classification classify_trajectory_detailed(const Trajectory& traj, const CodecConfig& cfg) {
  const auto idx = valid_indices(traj);
  const double invalid_fraction =
      traj.size() == 0 ? 1.0 : 1.0 - static_cast<double>(idx.size()) / traj.size();
  if (idx.size() < 2 || invalid_fraction > cfg.max_invalid_fraction) {
    return {TrajectoryType::straight, true};
  }

  constexpr double kStopDistance = 1.0;
  constexpr double kStopSpeedSpread = 0.2;
  double max_disp = 0.0;
  double vmin = std::numeric_limits<double>::infinity();
  double vmax = -vmin;
  for (std::size_t a = 0; a < idx.size(); ++a) {
    vmin = std::min(vmin, traj.speeds[idx[a]]);
    vmax = std::max(vmax, traj.speeds[idx[a]]);
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      max_disp = std::max(max_disp, (traj.positions[idx[a]] - traj.positions[idx[b]]).norm());
    }
  }
  if (max_disp <= kStopDistance && vmax - vmin <= kStopSpeedSpread) {
    return {TrajectoryType::stop, false};
  }

  const double theta = heading_change(traj);
  const double lateral = lateral_displacement(traj);
  const double da = cfg.angle_threshold;
  if (lateral >= cfg.lane_width) {
    if (theta >= 2.0 * da) return {TrajectoryType::left_turn, false};
    if (theta <= -2.0 * da) return {TrajectoryType::right_turn, false};
    if (theta >= da) return {TrajectoryType::left_lane_change, false};
    if (theta <= -da) return {TrajectoryType::right_lane_change, false};
  }
  return {TrajectoryType::straight, false};
}

TrajectoryType classify_trajectory(const Trajectory& traj, const CodecConfig& cfg) {
  return classify_trajectory_detailed(traj, cfg).type;
}

int direction_class(Vec2 ego_heading, Vec2 other_heading) {
  const double delta = std::atan2(cross(ego_heading, other_heading), dot(ego_heading, other_heading));
  const double quarter = std::numbers::pi / 4.0;
  if (std::abs(delta) < quarter) return 0;
  if (std::abs(delta) > 3.0 * quarter) return 1;
  return delta > 0.0 ? 2 : 3;
}

MapCode extract_map_code(const Scenario& s, const CodecConfig& cfg) {
  (void)cfg;
  if (s.vehicles.empty()) throw InvalidInputError("scenario has no ego vehicle");
  MapCode m{0, 0, 0, 0, -1, 1};
  for (const Lane& lane : s.map.lanes) {
    switch (lane.direction_class) {
      case LaneDirection::same: ++m.same_dir_lanes; break;
      case LaneDirection::opposite: ++m.opposite_dir_lanes; break;
      case LaneDirection::perpendicular_up: ++m.perp_up_lanes; break;
      case LaneDirection::perpendicular_down: ++m.perp_down_lanes; break;
    }
  }
  if (m.same_dir_lanes < 1) throw InvalidInputError("map has no same-direction lane");

  const VehicleState& ego = s.vehicles[0];
  if (s.map.intersection_center) {
    const double along =
        std::abs(dot(*s.map.intersection_center - ego.initial_position, ego.initial_heading));
    m.dist_to_intersection_bin = distance_bin(along, 15.0, kIntersectionDistanceMaxBin);
  }

  double best = std::numeric_limits<double>::infinity();
  for (const Lane& lane : s.map.lanes) {
    if (lane.direction_class != LaneDirection::same) continue;
    const double d = point_polyline_distance(ego.initial_position, lane.centerline);
    if (d < best) {
      best = d;
      m.ego_lane_id = lane.lane_id_from_right;
    }
  }
  m.ego_lane_id = std::clamp(m.ego_lane_id, 1, m.same_dir_lanes);
  return m;
}

CodeBundle extract_codes(const Scenario& s, const CodecConfig& cfg) {
  require_valid(s);
  cfg.validate();

  CodeBundle b;
  b.map_code = extract_map_code(s, cfg);

  const VehicleState& ego = s.vehicles[0];
  const Trajectory& ego_traj = s.trajectories[0];
  for (std::size_t i = 0; i < s.vehicles.size(); ++i) {
    const VehicleState& v = s.vehicles[i];
    const Trajectory& traj = s.trajectories[i];

    VehicleCode vc;
    for (int k = 0; k < kSpeedSamples; ++k) {
      vc.speed_bins[k] = speed_bin(traj.speeds[kSpeedFrames[k]], cfg.speed_gap, cfg.speed_max_bin);
    }
    vc.action = classify_trajectory(traj, cfg);

    InteractionCode ic;
    if (i > 0) {
      const Vec2 rel = v.initial_position - ego.initial_position;
      vc.pos_sector =
          rel.norm() > 0.0 ? sector_of(rel, ego.initial_heading, kVehiclePositionAreas) : 0;
      vc.distance_bin = distance_bin(rel.norm(), cfg.vehicle_distance_gap, cfg.vehicle_distance_max_bin);
      vc.direction_class = direction_class(ego.initial_heading, v.initial_heading);

      for (int k = 0; k < kInteractionSamples; ++k) {
        const std::size_t f = kInteractionFrames[k];
        const Vec2 r = traj.positions[f] - ego_traj.positions[f];
        ic.distance_bins[k] =
            distance_bin(r.norm(), cfg.interaction_distance_gap, kInteractionDistanceMaxBin);
        ic.direction_sectors[k] =
            r.norm() > 0.0 ? sector_of(r, ego_traj.headings[f], cfg.interaction_areas) : 0;
      }
    } else {
      vc.pos_sector = -1;
      vc.distance_bin = 0;
      vc.direction_class = 0;
    }
    b.vehicle_codes.push_back(vc);
    b.interaction_codes.push_back(ic);
  }
  return b;
}

}  // namespace scenecode
