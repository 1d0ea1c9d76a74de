#include "scenecode/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace scenecode {

void MetricConfig::validate() const {
  if (!(iou_threshold_delta >= 0.0 && iou_threshold_delta < 1.0)) {
    throw InvalidInputError("metric config field 'iou_threshold_delta': must be in [0, 1)");
  }
  if (!(box_default_length > 0.0)) throw InvalidInputError("metric config field 'box_default_length': must be > 0");
  if (!(box_default_width > 0.0)) throw InvalidInputError("metric config field 'box_default_width': must be > 0");
}

nlohmann::json metric_config_to_json(const MetricConfig& c) {
  return {{"iou_threshold_delta", c.iou_threshold_delta},
          {"box_default_length", c.box_default_length},
          {"box_default_width", c.box_default_width}};
}

MetricConfig metric_config_from_json(const nlohmann::json& j) {
  MetricConfig c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "iou_threshold_delta") c.iou_threshold_delta = value.get<double>();
      else if (key == "box_default_length") c.box_default_length = value.get<double>();
      else if (key == "box_default_width") c.box_default_width = value.get<double>();
      else throw InvalidInputError("unknown metric config field '" + key + "'");
    } catch (const nlohmann::json::exception&) {
      throw InvalidInputError("metric config field '" + key + "' has the wrong type");
    }
  }
  c.validate();
  return c;
}

namespace {

bool valid_at(const Trajectory& t, std::size_t i) { return t.valid_mask.empty() || t.valid_mask[i]; }

void require_same_length(const Trajectory& a, const Trajectory& b, const char* op) {
  if (a.size() != b.size()) {
    throw InvalidInputError(std::string(op) + ": trajectories have " + std::to_string(a.size()) + " and " +
                            std::to_string(b.size()) + " timesteps");
  }
}

std::vector<Position2D> valid_points(const Trajectory& t) {
  std::vector<Position2D> out;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (valid_at(t, i)) out.push_back(t.positions[i]);
  }
  return out;
}

double directed_hausdorff(const std::vector<Position2D>& a, const std::vector<Position2D>& b) {
  double worst = 0.0;
  for (const Position2D& p : a) {
    double best = std::numeric_limits<double>::infinity();
    for (const Position2D& q : b) best = std::min(best, (p - q).norm());
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace

double ade(const Trajectory& a, const Trajectory& b) {
  require_same_length(a, b, "ade");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    if (!valid_at(a, t) || !valid_at(b, t)) continue;
    sum += (a.positions[t] - b.positions[t]).norm();
    ++count;
  }
  if (count == 0) throw InvalidInputError("ade: no timestep is valid in both trajectories");
  return sum / static_cast<double>(count);
}

double fde(const Trajectory& a, const Trajectory& b) {
  require_same_length(a, b, "fde");
  if (a.size() == 0 || !valid_at(a, a.size() - 1) || !valid_at(b, b.size() - 1)) {
    throw InvalidInputError("fde: final timestep is not valid in both trajectories");
  }
  return (a.positions.back() - b.positions.back()).norm();
}

double hausdorff(const std::vector<Position2D>& a, const std::vector<Position2D>& b) {
  if (a.empty() || b.empty()) throw InvalidInputError("hausdorff: empty point set");
  return std::max(directed_hausdorff(a, b), directed_hausdorff(b, a));
}

double hausdorff(const Trajectory& a, const Trajectory& b) { return hausdorff(valid_points(a), valid_points(b)); }

std::array<Position2D, 4> OrientedBox::corners() const {
  const double n = heading.norm();
  const Vec2 f = n > 0.0 ? (1.0 / n) * heading : Vec2{1.0, 0.0};
  const Vec2 l{-f.y, f.x};
  const Vec2 hf = 0.5 * length * f;
  const Vec2 hl = 0.5 * width * l;
  return {center - hf - hl, center + hf - hl, center + hf + hl, center - hf + hl};
}

double polygon_area(const std::vector<Position2D>& polygon) {
  double twice = 0.0;
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    twice += cross(polygon[i], polygon[(i + 1) % polygon.size()]);
  }
  return 0.5 * std::abs(twice);
}

std::vector<Position2D> clip_convex(const std::vector<Position2D>& subject, const std::vector<Position2D>& clip) {
  std::vector<Position2D> out = subject;
  for (std::size_t e = 0; e < clip.size() && !out.empty(); ++e) {
    const Position2D a = clip[e];
    const Position2D b = clip[(e + 1) % clip.size()];
    const Vec2 edge = b - a;
    auto side = [&](Position2D p) { return cross(edge, p - a); };
    std::vector<Position2D> in = std::move(out);
    out.clear();
    for (std::size_t i = 0; i < in.size(); ++i) {
      const Position2D p = in[i];
      const Position2D q = in[(i + 1) % in.size()];
      const double sp = side(p);
      const double sq = side(q);
      if (sp >= 0.0) out.push_back(p);
      if ((sp >= 0.0) != (sq >= 0.0)) {
        const double t = sp / (sp - sq);
        out.push_back(p + t * (q - p));
      }
    }
  }
  return out;
}

double obb_iou(const OrientedBox& a, const OrientedBox& b) {
  if (!(a.length > 0.0 && a.width > 0.0 && b.length > 0.0 && b.width > 0.0)) {
    throw DegenerateBoxError("obb_iou: box with zero area");
  }
  const auto ca = a.corners();
  const auto cb = b.corners();
  const std::vector<Position2D> pa(ca.begin(), ca.end());
  const std::vector<Position2D> pb(cb.begin(), cb.end());
  const double inter = polygon_area(clip_convex(pa, pb));
  const double uni = a.length * a.width + b.length * b.width - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

double scenario_collision_rate(const Scenario& s, const MetricConfig& cfg) {
  const std::size_t n = s.trajectories.size();
  if (n < 2) return 0.0;
  auto box = [&](std::size_t i, std::size_t t) {
    const VehicleState* v = i < s.vehicles.size() ? &s.vehicles[i] : nullptr;
    const Trajectory& tr = s.trajectories[i];
    return OrientedBox{tr.positions[t], tr.headings.size() > t ? tr.headings[t] : Vec2{1.0, 0.0},
                       v && v->length > 0.0 ? v->length : cfg.box_default_length,
                       v && v->width > 0.0 ? v->width : cfg.box_default_width};
  };
  std::size_t colliding = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const std::size_t steps = std::min(s.trajectories[i].size(), s.trajectories[j].size());
      for (std::size_t t = 0; t < steps; ++t) {
        if (!valid_at(s.trajectories[i], t) || !valid_at(s.trajectories[j], t)) continue;
        const OrientedBox bi = box(i, t);
        const OrientedBox bj = box(j, t);
        const double reach = 0.5 * (std::hypot(bi.length, bi.width) + std::hypot(bj.length, bj.width));
        if ((bi.center - bj.center).norm() > reach) continue;
        if (obb_iou(bi, bj) > cfg.iou_threshold_delta) {
          ++colliding;
          break;
        }
      }
    }
  }
  return static_cast<double>(colliding) / (static_cast<double>(n * (n - 1)) / 2.0);
}

double scr(const std::vector<Scenario>& scenarios, const MetricConfig& cfg) {
  if (scenarios.empty()) return 0.0;
  double sum = 0.0;
  for (const Scenario& s : scenarios) sum += scenario_collision_rate(s, cfg);
  return sum / static_cast<double>(scenarios.size());
}

ScenarioMetrics scenario_metrics(const Scenario& gt, const Scenario& pred, const MetricConfig& cfg) {
  const std::size_t n = gt.trajectories.size();
  if (n != pred.trajectories.size()) {
    throw InvalidInputError("scenario_metrics: ground truth has " + std::to_string(n) + " vehicles, prediction has " +
                            std::to_string(pred.trajectories.size()));
  }
  if (n == 0) throw InvalidInputError("scenario_metrics: no vehicles");
  ScenarioMetrics m;
  m.min_ade = std::numeric_limits<double>::infinity();
  m.min_fde = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double a = ade(gt.trajectories[i], pred.trajectories[i]);
    const double f = fde(gt.trajectories[i], pred.trajectories[i]);
    m.made += a;
    m.mfde += f;
    m.min_ade = std::min(m.min_ade, a);
    m.min_fde = std::min(m.min_fde, f);
    m.hd += hausdorff(gt.trajectories[i], pred.trajectories[i]);
  }
  m.made /= static_cast<double>(n);
  m.mfde /= static_cast<double>(n);
  m.hd /= static_cast<double>(n);
  m.scr = scenario_collision_rate(pred, cfg);
  return m;
}

MetricReport make_report(std::vector<ScenarioMetrics> rows) {
  MetricReport r;
  r.scenarios = std::move(rows);
  r.aggregate.name = "aggregate";
  if (r.scenarios.empty()) return r;
  for (const ScenarioMetrics& m : r.scenarios) {
    r.aggregate.made += m.made;
    r.aggregate.min_ade += m.min_ade;
    r.aggregate.mfde += m.mfde;
    r.aggregate.min_fde += m.min_fde;
    r.aggregate.scr += m.scr;
    r.aggregate.hd += m.hd;
  }
  const double k = 1.0 / static_cast<double>(r.scenarios.size());
  r.aggregate.made *= k;
  r.aggregate.min_ade *= k;
  r.aggregate.mfde *= k;
  r.aggregate.min_fde *= k;
  r.aggregate.scr *= k;
  r.aggregate.hd *= k;
  return r;
}

namespace {

void csv_row(std::ostringstream& out, const ScenarioMetrics& m) {
  out << m.name << ',' << m.made << ',' << m.min_ade << ',' << m.mfde << ',' << m.min_fde << ',' << m.scr << ','
      << m.hd << '\n';
}

nlohmann::json row_json(const ScenarioMetrics& m) {
  return {{"name", m.name}, {"mADE", m.made}, {"minADE", m.min_ade}, {"mFDE", m.mfde},
          {"minFDE", m.min_fde}, {"SCR", m.scr}, {"HD", m.hd}};
}

}  // namespace

std::string report_to_csv(const MetricReport& r) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed;
  out << "scenario,mADE,minADE,mFDE,minFDE,SCR,HD\n";
  for (const ScenarioMetrics& m : r.scenarios) csv_row(out, m);
  csv_row(out, r.aggregate);
  return out.str();
}

nlohmann::json report_to_json(const MetricReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const ScenarioMetrics& m : r.scenarios) rows.push_back(row_json(m));
  return {{"scenarios", rows}, {"aggregate", row_json(r.aggregate)}};
}

}  // namespace scenecode
