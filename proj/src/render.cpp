#include "scenecode/render.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

namespace scenecode {

void RenderStyle::validate() const {
  if (width <= 0 || height <= 0) throw InvalidInputError("render style: width and height must be positive");
  if (!(margin >= 0.0) || 2.0 * margin >= std::min(width, height)) {
    throw InvalidInputError("render style field 'margin': must leave a drawable area");
  }
  if (vehicle_colors.empty()) throw InvalidInputError("render style field 'vehicle_colors': must not be empty");
  if (!(min_alpha >= 0.0 && min_alpha <= 1.0)) throw InvalidInputError("render style field 'min_alpha': must be in [0, 1]");
}

nlohmann::json render_style_to_json(const RenderStyle& s) {
  return {{"width", s.width},           {"height", s.height},
          {"margin", s.margin},         {"lane_color", s.lane_color},
          {"vehicle_colors", s.vehicle_colors}, {"min_alpha", s.min_alpha}};
}

RenderStyle render_style_from_json(const nlohmann::json& j) {
  RenderStyle s;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "width") s.width = value.get<int>();
      else if (key == "height") s.height = value.get<int>();
      else if (key == "margin") s.margin = value.get<double>();
      else if (key == "lane_color") s.lane_color = value.get<std::string>();
      else if (key == "vehicle_colors") s.vehicle_colors = value.get<std::vector<std::string>>();
      else if (key == "min_alpha") s.min_alpha = value.get<double>();
      else throw InvalidInputError("unknown render style field '" + key + "'");
    } catch (const nlohmann::json::exception&) {
      throw InvalidInputError("render style field '" + key + "' has the wrong type");
    }
  }
  s.validate();
  return s;
}

std::string render_svg(const Scenario& s, const RenderStyle& style) {
  style.validate();
  double min_x = std::numeric_limits<double>::infinity();
  double min_y = min_x;
  double max_x = -min_x;
  double max_y = -min_x;
  auto extend = [&](Vec2 p) {
    min_x = std::min(min_x, p.x);
    min_y = std::min(min_y, p.y);
    max_x = std::max(max_x, p.x);
    max_y = std::max(max_y, p.y);
  };
  for (const Lane& l : s.map.lanes) std::for_each(l.centerline.begin(), l.centerline.end(), extend);
  for (const Trajectory& t : s.trajectories) std::for_each(t.positions.begin(), t.positions.end(), extend);
  if (min_x > max_x) min_x = min_y = -1.0, max_x = max_y = 1.0;

  const double span = std::max({max_x - min_x, max_y - min_y, 1.0});
  const double scale = (std::min(style.width, style.height) - 2.0 * style.margin) / span;
  // SVG y grows downwards.
  auto px = [&](Vec2 p) { return Vec2{style.margin + (p.x - min_x) * scale, style.height - style.margin - (p.y - min_y) * scale}; };

  std::ostringstream out;
  out.precision(2);
  out << std::fixed;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << style.width << "\" height=\"" << style.height
      << "\" viewBox=\"0 0 " << style.width << ' ' << style.height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (const Lane& l : s.map.lanes) {
    out << "<polyline fill=\"none\" stroke=\"" << style.lane_color << "\" stroke-width=\"" << std::max(1.0, 0.3 * scale)
        << "\" stroke-dasharray=\"6 4\" points=\"";
    for (const Vec2& p : l.centerline) {
      const Vec2 q = px(p);
      out << q.x << ',' << q.y << ' ';
    }
    out << "\"/>\n";
  }
  for (std::size_t i = 0; i < s.trajectories.size(); ++i) {
    const Trajectory& t = s.trajectories[i];
    const std::string& color = style.vehicle_colors[i % style.vehicle_colors.size()];
    const double radius = std::max(1.5, 0.5 * scale);
    for (std::size_t k = 0; k < t.size(); ++k) {
      if (!t.valid_mask.empty() && !t.valid_mask[k]) continue;
      const double alpha =
          t.size() > 1 ? style.min_alpha + (1.0 - style.min_alpha) * static_cast<double>(k) / (t.size() - 1) : 1.0;
      const Vec2 q = px(t.positions[k]);
      out << "<circle cx=\"" << q.x << "\" cy=\"" << q.y << "\" r=\"" << radius << "\" fill=\"" << color
          << "\" fill-opacity=\"" << alpha << "\"/>\n";
    }
    if (t.size() > 0) {
      const Vec2 q = px(t.positions.front());
      out << "<text x=\"" << q.x + radius + 2 << "\" y=\"" << q.y - radius - 2 << "\" font-size=\"12\" fill=\"" << color
          << "\">V" << i + 1 << "</text>\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

void write_svg(const Scenario& s, const std::string& path, const RenderStyle& style) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << render_svg(s, style);
}

}  // namespace scenecode
