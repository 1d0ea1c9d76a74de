// Trajectory realism metrics: displacement errors, Hausdorff distance and the
// oriented-box scenario collision rate.
#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "scenecode/scenario.hpp"

namespace scenecode {

class DegenerateBoxError : public InvalidInputError {
 public:
  using InvalidInputError::InvalidInputError;
};

struct MetricConfig {
  double iou_threshold_delta{0.05};
  double box_default_length{kDefaultVehicleLength};
  double box_default_width{kDefaultVehicleWidth};

  void validate() const;
};

nlohmann::json metric_config_to_json(const MetricConfig& c);
MetricConfig metric_config_from_json(const nlohmann::json& j);

/// Mean Euclidean distance over timesteps valid in both trajectories.
double ade(const Trajectory& a, const Trajectory& b);
/// Euclidean distance at the final timestep.
double fde(const Trajectory& a, const Trajectory& b);
/// Discrete symmetric Hausdorff distance between the valid point sets.
double hausdorff(const std::vector<Position2D>& a, const std::vector<Position2D>& b);
double hausdorff(const Trajectory& a, const Trajectory& b);

struct OrientedBox {
  Position2D center;
  Vec2 heading{1.0, 0.0};
  double length{kDefaultVehicleLength};
  double width{kDefaultVehicleWidth};

  /// Corners counter-clockwise.
  [[nodiscard]] std::array<Position2D, 4> corners() const;
};

double polygon_area(const std::vector<Position2D>& polygon);
/// Sutherland-Hodgman clip of `subject` by the convex counter-clockwise `clip`.
std::vector<Position2D> clip_convex(const std::vector<Position2D>& subject, const std::vector<Position2D>& clip);
double obb_iou(const OrientedBox& a, const OrientedBox& b);

/// Fraction of vehicle pairs whose boxes overlap with IoU > delta at some
/// timestep valid for both. 0 when there are fewer than two vehicles.
double scenario_collision_rate(const Scenario& s, const MetricConfig& cfg);
/// Mean collision rate over scenarios.
double scr(const std::vector<Scenario>& scenarios, const MetricConfig& cfg);

struct ScenarioMetrics {
  std::string name;
  double made{0.0};
  double min_ade{0.0};
  double mfde{0.0};
  double min_fde{0.0};
  double scr{0.0};
  double hd{0.0};
};

/// Vehicles correspond by index; the collision rate is that of `pred`.
ScenarioMetrics scenario_metrics(const Scenario& gt, const Scenario& pred, const MetricConfig& cfg = {});

struct MetricReport {
  std::vector<ScenarioMetrics> scenarios;
  /// Mean of every column over scenarios.
  ScenarioMetrics aggregate;
};

MetricReport make_report(std::vector<ScenarioMetrics> rows);

/// CSV with a header, one row per scenario and a final "aggregate" row.
std::string report_to_csv(const MetricReport& r);
nlohmann::json report_to_json(const MetricReport& r);

}  // namespace scenecode
