#include <doctest.h>

#include <random>

#include "scenecode/synth.hpp"
#include "support.hpp"

using namespace scenecode;
using namespace scenecode::testing;

TEST_CASE("sector_of: prompt examples and boundaries") {
  const Vec2 east{1, 0};
  CHECK(sector_of({10, 0}, east, 6) == 0);
  CHECK(sector_of({-10, 0}, east, 6) == 3);
  CHECK(sector_of({0, 10}, east, 6) == 4);
  CHECK(sector_of({0, -10}, east, 6) == 1);
  CHECK(sector_of({10, 1}, east, 6) == 0);
  CHECK(sector_of({10, -1}, east, 6) == 0);
  CHECK(sector_of({-10, 1}, east, 6) == 3);
  CHECK(sector_of({1, 1}, east, 6) == 5);
  CHECK(sector_of({-1, 1}, east, 6) == 4);
  CHECK(sector_of({-1, -1}, east, 6) == 2);
  // Heading north: a vehicle to the east is on the right.
  CHECK(sector_of({10, 0}, {0, 1}, 6) == 1);
  CHECK(sector_of({10, 0}, east, 4) == 0);
  CHECK(sector_of({0, -10}, east, 4) == 1);
  CHECK(sector_of({0, -10}, east, 8) == 2);
  CHECK_THROWS_AS(sector_of({0, 0}, east, 6), DegenerateInputError);
}

TEST_CASE("distance_bin and speed_bin examples") {
  CHECK(distance_bin(7, 15, 3) == 0);
  CHECK(distance_bin(30, 15, 3) == 2);
  CHECK(distance_bin(75, 15, 3) == 3);
  CHECK(distance_bin(14.999, 15, 3) == 0);
  CHECK(distance_bin(15, 15, 3) == 1);
  CHECK(speed_bin(20) == 8);
  CHECK(speed_bin(0) == 0);
  CHECK(speed_bin(6) == 2);
  CHECK(speed_bin(35) == 8);
}

TEST_CASE("binning is monotone") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  std::vector<double> xs(2000);
  for (double& x : xs) x = u(rng);
  std::sort(xs.begin(), xs.end());
  for (std::size_t i = 1; i < xs.size(); ++i) {
    CHECK(distance_bin(xs[i - 1], 15, 5) <= distance_bin(xs[i], 15, 5));
    CHECK(speed_bin(xs[i - 1] / 4) <= speed_bin(xs[i] / 4));
  }
}

TEST_CASE("classify_trajectory examples") {
  const CodecConfig cfg;
  CHECK(classify_trajectory(Trajectory::from_positions(std::vector<Position2D>(kTimesteps, {1, 2})), cfg) ==
        TrajectoryType::stop);
  CHECK(classify_trajectory(Trajectory::from_positions(line_points({0, 0}, {1, 0})), cfg) == TrajectoryType::straight);
  CHECK(classify_trajectory(Trajectory::from_positions(arc_points({0, 0}, 12, std::numbers::pi / 2)), cfg) ==
        TrajectoryType::left_turn);
  CHECK(classify_trajectory(Trajectory::from_positions(arc_points({0, 0}, 12, -std::numbers::pi / 2)), cfg) ==
        TrajectoryType::right_turn);
  // A drift with no heading change stays straight even with lateral motion.
  CHECK(classify_trajectory(Trajectory::from_positions(line_points({0, 0}, {1, 0.01})), cfg) ==
        TrajectoryType::straight);
}

TEST_CASE("classify_trajectory: heavily masked trajectories are flagged straight") {
  const CodecConfig cfg;
  Trajectory t = Trajectory::from_positions(arc_points({0, 0}, 12, std::numbers::pi / 2));
  for (std::size_t i = 0; i < 15; ++i) t.valid_mask[i] = false;
  const Classification c = classify_trajectory_detailed(t, cfg);
  CHECK(c.flagged);
  CHECK(c.type == TrajectoryType::straight);
}

TEST_CASE("direction_class thresholds") {
  CHECK(direction_class({1, 0}, {1, 0.5}) == 0);
  CHECK(direction_class({1, 0}, {-1, 0.1}) == 1);
  CHECK(direction_class({1, 0}, {0, 1}) == 2);
  CHECK(direction_class({1, 0}, {0, -1}) == 3);
}

TEST_CASE("extract_codes: follower 20 m behind") {
  const Scenario s = make_scenario({line_points({0, 0}, {1, 0}), line_points({-20, 0}, {1, 0})}, straight_road(2));
  const CodeBundle b = extract_codes(s, CodecConfig{});
  REQUIRE(b.vehicle_count() == 2);
  CHECK(b.vehicle_codes[1].flatten() == std::array<int, 10>{3, 1, 0, 4, 4, 4, 4, 4, 4, 1});
  CHECK(b.interaction_codes[1].distance_bins == std::array<int, 5>{1, 1, 1, 1, 1});
  CHECK(b.interaction_codes[1].direction_sectors == std::array<int, 5>{3, 3, 3, 3, 3});
  CHECK(b.vehicle_codes[0].flatten() == std::array<int, 10>{-1, 0, 0, 4, 4, 4, 4, 4, 4, 1});
  CHECK(b.interaction_codes[0] == InteractionCode{});
}

TEST_CASE("extract_codes: single stopped ego on a 2-lane road") {
  const Scenario s = make_scenario({std::vector<Position2D>(kTimesteps, {0, 0})}, straight_road(2));
  const CodeBundle b = extract_codes(s, CodecConfig{});
  CHECK(b.vehicle_codes[0].flatten() == std::array<int, 10>{-1, 0, 0, 0, 0, 0, 0, 0, 0, 0});
  CHECK(b.map_code.flatten() == std::array<int, 6>{2, 0, 0, 0, -1, 1});
}

TEST_CASE("extract_codes: invalid scenario is rejected") {
  Scenario s;
  s.map = straight_road(1);
  CHECK_THROWS_AS(extract_codes(s, CodecConfig{}), ValidationError);
}

TEST_CASE("extract_codes is invariant under rigid transforms") {
  const CodecConfig cfg;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> shift(-500, 500);
  for (const Scenario& s : synth_dataset(15, 21, 5)) {
    const CodeBundle b = extract_codes(s, cfg);
    for (int k = 0; k < 4; ++k) {
      const double a = angle(rng);
      const Scenario moved = transform_scenario(s, {std::cos(a), std::sin(a)}, {shift(rng), shift(rng)});
      CHECK(extract_codes(moved, cfg) == b);
    }
  }
}

TEST_CASE("CodecConfig: JSON round trip and named rejection") {
  CodecConfig c;
  c.interaction_areas = 8;
  c.speed_gap = 3.0;
  const CodecConfig back = codec_config_from_json(codec_config_to_json(c));
  CHECK(back.interaction_areas == 8);
  CHECK(back.speed_gap == 3.0);
  try {
    codec_config_from_json({{"speed_gapp", 2.0}});
    FAIL("expected rejection");
  } catch (const InvalidInputError& e) {
    CHECK(std::string(e.what()).find("speed_gapp") != std::string::npos);
  }
  CHECK_THROWS_AS(codec_config_from_json({{"interaction_areas", 5}}), InvalidInputError);
}

TEST_CASE("validate_bundle catches broken invariants") {
  CodeBundle b;
  b.vehicle_codes.resize(1);
  b.interaction_codes.resize(1);
  CHECK(validate_bundle(b).empty());
  b.vehicle_codes[0].pos_sector = 2;
  CHECK_FALSE(validate_bundle(b).empty());
  b.vehicle_codes[0].pos_sector = -1;
  b.map_code.ego_lane_id = 3;
  CHECK_FALSE(validate_bundle(b).empty());
  b.map_code.ego_lane_id = 1;
  b.interaction_codes.resize(2);
  CHECK_FALSE(validate_bundle(b).empty());
}
