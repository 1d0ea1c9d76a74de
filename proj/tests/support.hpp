// Shared builders for tests.
#pragma once

#include <cmath>
#include <limits>
#include <utility>
#include <numbers>
#include <random>
#include <vector>

#include "scenecode/codec.hpp"
#include "scenecode/metrics.hpp"
#include "scenecode/scenario.hpp"

namespace scenecode::testing {

inline std::vector<Position2D> line_points(Vec2 start, Vec2 step, std::size_t n = kTimesteps) {
  std::vector<Position2D> out;
  for (std::size_t t = 0; t < n; ++t) out.push_back(start + static_cast<double>(t) * step);
  return out;
}

/// Counter-clockwise (left) arc for positive `sweep`, starting at `start`
/// facing +x.
inline std::vector<Position2D> arc_points(Vec2 start, double radius, double sweep, std::size_t n = kTimesteps) {
  std::vector<Position2D> out;
  const double sign = sweep >= 0 ? 1.0 : -1.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double a = sweep * static_cast<double>(t) / static_cast<double>(n - 1);
    out.push_back(start + Vec2{radius * std::sin(std::abs(a)), sign * radius * (1.0 - std::cos(a))});
  }
  return out;
}

inline LaneMap straight_road(int same_lanes, int opposite_lanes = 0, double length = 200.0) {
  LaneMap m;
  for (int id = 1; id <= same_lanes; ++id) {
    const double y = (id - 1) * kDefaultLaneWidth;
    m.lanes.push_back({{{-length / 2, y}, {length / 2, y}}, LaneDirection::same, id});
  }
  for (int id = 1; id <= opposite_lanes; ++id) {
    const double y = (same_lanes + opposite_lanes - id) * kDefaultLaneWidth;
    m.lanes.push_back({{{length / 2, y}, {-length / 2, y}}, LaneDirection::opposite, id});
  }
  return m;
}

/// Vehicles take their initial state from their trajectory's first step.
inline Scenario make_scenario(const std::vector<std::vector<Position2D>>& paths, LaneMap map) {
  Scenario s;
  s.map = std::move(map);
  for (const auto& p : paths) {
    Trajectory t = Trajectory::from_positions(p);
    VehicleState v;
    v.initial_position = t.positions.front();
    v.initial_heading = t.headings.front();
    v.initial_speed = t.speeds.front();
    s.vehicles.push_back(v);
    s.trajectories.push_back(std::move(t));
  }
  return s;
}

/// A valid bundle with 1..max_vehicles agents; the ego rows follow the
/// fixed ego conventions so text round trips are exact.
inline CodeBundle random_bundle(std::mt19937_64& rng, int max_vehicles = 8) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  CodeBundle b;
  b.map_code.same_dir_lanes = pick(1, 5);
  b.map_code.opposite_dir_lanes = pick(0, 5);
  b.map_code.perp_up_lanes = pick(0, 3);
  b.map_code.perp_down_lanes = pick(0, 3);
  b.map_code.dist_to_intersection_bin = pick(-1, 3);
  b.map_code.ego_lane_id = pick(1, b.map_code.same_dir_lanes);
  const int n = pick(1, max_vehicles);
  for (int i = 0; i < n; ++i) {
    VehicleCode v;
    InteractionCode c;
    if (i > 0) {
      v.pos_sector = pick(0, 5);
      v.distance_bin = pick(0, 3);
      v.direction_class = pick(0, 3);
      for (int k = 0; k < kInteractionSamples; ++k) {
        c.distance_bins[k] = pick(0, 5);
        c.direction_sectors[k] = pick(0, 5);
      }
    }
    for (int& s : v.speed_bins) s = pick(0, 8);
    v.action = static_cast<TrajectoryType>(pick(0, kTrajectoryTypeCount - 1));
    b.vehicle_codes.push_back(v);
    b.interaction_codes.push_back(c);
  }
  return b;
}

/// Symmetric Hausdorff distance by the plain double loop over Euclidean distances.
inline double naive_hausdorff(const std::vector<Position2D>& a, const std::vector<Position2D>& b) {
  auto directed = [](const std::vector<Position2D>& from, const std::vector<Position2D>& to) {
    double worst = 0.0;
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) best = std::min(best, (p - q).norm());
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(directed(a, b), directed(b, a));
}

/// IoU estimated by uniform sampling over the joint bounding rectangle.
inline double monte_carlo_iou(const OrientedBox& a, const OrientedBox& b, std::size_t samples, std::mt19937_64& rng) {
  auto inside = [](const OrientedBox& box, Vec2 p) {
    const Vec2 local = to_frame(p - box.center, box.heading);
    return std::abs(local.x) <= box.length / 2 && std::abs(local.y) <= box.width / 2;
  };
  double lo_x = 1e300, lo_y = 1e300, hi_x = -1e300, hi_y = -1e300;
  for (const OrientedBox* box : {&a, &b}) {
    for (const Vec2& c : box->corners()) {
      lo_x = std::min(lo_x, c.x);
      lo_y = std::min(lo_y, c.y);
      hi_x = std::max(hi_x, c.x);
      hi_y = std::max(hi_y, c.y);
    }
  }
  std::uniform_real_distribution<double> ux(lo_x, hi_x), uy(lo_y, hi_y);
  std::size_t in_a = 0, in_b = 0, both = 0;
  for (std::size_t k = 0; k < samples; ++k) {
    const Vec2 p{ux(rng), uy(rng)};
    const bool ia = inside(a, p), ib = inside(b, p);
    in_a += ia;
    in_b += ib;
    both += ia && ib;
  }
  const std::size_t uni = in_a + in_b - both;
  return uni == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(uni);
}

/// Box pair with centers a few meters apart so that overlaps are common.
inline std::pair<OrientedBox, OrientedBox> random_box_pair(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(-3.0, 3.0), ang(-std::numbers::pi, std::numbers::pi), ext(0.5, 5.0);
  auto make = [&] {
    OrientedBox b;
    b.center = {pos(rng), pos(rng)};
    const double t = ang(rng);
    b.heading = {std::cos(t), std::sin(t)};
    b.length = ext(rng);
    b.width = ext(rng);
    return b;
  };
  OrientedBox first = make();
  return {first, make()};
}

}  // namespace scenecode::testing
