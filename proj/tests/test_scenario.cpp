#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "scenecode/synth.hpp"
#include "support.hpp"

using namespace scenecode;
using namespace scenecode::testing;

TEST_CASE("derive_kinematics: constant velocity along +x") {
  const auto k = derive_kinematics(line_points({0, 0}, {1, 0}), 0.1);
  REQUIRE(k.speeds.size() == kTimesteps);
  for (std::size_t t = 0; t < kTimesteps; ++t) {
    CHECK(k.speeds[t] == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(k.headings[t].x == doctest::Approx(1.0));
    CHECK(k.headings[t].y == doctest::Approx(0.0));
  }
}

TEST_CASE("derive_kinematics: constant speed is exactly |dp|/dt") {
  const Vec2 step{0.75, -0.5};
  const auto k = derive_kinematics(line_points({3, 4}, step, 20), 0.25);
  const double expected = std::hypot(0.75, -0.5) / 0.25;
  for (double v : k.speeds) CHECK(std::abs(v - expected) < 1e-12);
}

TEST_CASE("derive_kinematics: stationary falls back to (1,0)") {
  const auto k = derive_kinematics(std::vector<Position2D>(kTimesteps, {5, 5}), 0.1);
  for (std::size_t t = 0; t < kTimesteps; ++t) {
    CHECK(k.speeds[t] == 0.0);
    CHECK(k.headings[t] == Vec2{1, 0});
  }
}

TEST_CASE("derive_kinematics: heading carried forward while stopped, back-filled before first motion") {
  std::vector<Position2D> p{{0, 0}, {0, 0}, {0, 1}, {0, 2}, {0, 2}, {0, 2}};
  const auto k = derive_kinematics(p, 0.1);
  for (const Vec2& h : k.headings) {
    CHECK(h.x == doctest::Approx(0.0));
    CHECK(h.y == doctest::Approx(1.0));
  }
}

TEST_CASE("derive_kinematics: quarter circle ends rotated by about 90 degrees") {
  const double r = 10.0;
  std::vector<Position2D> p;
  for (std::size_t t = 0; t < kTimesteps; ++t) {
    const double a = (std::numbers::pi / 2) * t / (kTimesteps - 1);
    p.push_back({r * std::sin(a), r * (1 - std::cos(a))});
  }
  const auto k = derive_kinematics(p, 0.1);
  const double turned = std::atan2(cross(k.headings.front(), k.headings.back()), dot(k.headings.front(), k.headings.back()));
  CHECK(std::abs(turned * 180 / std::numbers::pi - 90.0) <= 2.0);
  for (const Vec2& h : k.headings) CHECK(std::abs(h.norm() - 1.0) < 1e-9);
}

TEST_CASE("derive_kinematics: rejects short input and bad dt") {
  CHECK_THROWS_AS(derive_kinematics({{0, 0}}, 0.1), InvalidInputError);
  CHECK_THROWS_AS(derive_kinematics({{0, 0}, {1, 0}}, 0.0), InvalidInputError);
}

TEST_CASE("validate_scenario") {
  const Scenario ok = make_scenario({line_points({0, 0}, {1, 0}), line_points({-20, 0}, {1, 0})}, straight_road(2));
  CHECK(validate_scenario(ok).empty());

  SUBCASE("33 vehicles") {
    Scenario s = ok;
    while (s.vehicles.size() < 33) {
      s.vehicles.push_back(ok.vehicles[1]);
      s.trajectories.push_back(ok.trajectories[1]);
    }
    const auto v = validate_scenario(s);
    REQUIRE_FALSE(v.empty());
    bool found = false;
    for (const auto& x : v) found |= x.rule == "vehicle count > 32";
    CHECK(found);
  }
  SUBCASE("trajectory of length 49") {
    Scenario s = make_scenario({line_points({0, 0}, {1, 0}, 49)}, straight_road(1));
    bool found = false;
    for (const auto& x : validate_scenario(s)) found |= x.rule == "T != 50";
    CHECK(found);
  }
  SUBCASE("no vehicles") {
    Scenario s;
    s.map = straight_road(1);
    CHECK_FALSE(validate_scenario(s).empty());
    CHECK_THROWS_AS(require_valid(s), ValidationError);
  }
  SUBCASE("non-positive box") {
    Scenario s = ok;
    s.vehicles[1].width = 0.0;
    CHECK_FALSE(validate_scenario(s).empty());
  }
  SUBCASE("lane with one point") {
    Scenario s = ok;
    s.map.lanes[0].centerline.resize(1);
    CHECK_FALSE(validate_scenario(s).empty());
  }
}

TEST_CASE("scenario JSON round trip and file I/O") {
  const Scenario s = synth_dataset(1, 5, 4).front();
  const Scenario back = scenario_from_json(scenario_to_json(s));
  REQUIRE(back.vehicles.size() == s.vehicles.size());
  CHECK(back.map == s.map);
  for (std::size_t i = 0; i < s.trajectories.size(); ++i) {
    CHECK(back.trajectories[i].positions == s.trajectories[i].positions);
    CHECK(back.trajectories[i].speeds == s.trajectories[i].speeds);
  }

  const auto dir = std::filesystem::temp_directory_path() / "scenecode_test_scenario";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "s.json").string();
  save_scenario(s, path);
  CHECK(load_scenario(path).trajectories[0].positions == s.trajectories[0].positions);

  std::ofstream(dir / "bad.json") << "{not json";
  CHECK_THROWS_AS(load_scenario((dir / "bad.json").string()), InvalidInputError);
  CHECK_THROWS_WITH(load_scenario((dir / "missing.json").string()), doctest::Contains("cannot open"));
}

TEST_CASE("transform_scenario preserves pairwise distances and to_ego_frame normalizes the ego") {
  const Scenario s = synth_dataset(1, 9, 4).front();
  const Vec2 h{std::cos(0.7), std::sin(0.7)};
  const Scenario moved = transform_scenario(s, h, {13.0, -4.0});
  for (std::size_t i = 0; i < s.trajectories.size(); ++i) {
    for (std::size_t t = 0; t < kTimesteps; t += 7) {
      const double d0 = (s.trajectories[i].positions[t] - s.trajectories[0].positions[t]).norm();
      const double d1 = (moved.trajectories[i].positions[t] - moved.trajectories[0].positions[t]).norm();
      CHECK(d1 == doctest::Approx(d0).epsilon(1e-12));
    }
  }
  const Scenario back = to_ego_frame(moved);
  CHECK(back.trajectories[0].positions[0].norm() < 1e-9);
  CHECK(back.vehicles[0].initial_heading.x == doctest::Approx(1.0));
}
