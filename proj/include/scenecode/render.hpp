// SVG plots of scenarios: lanes plus trajectories that fade in over time.
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "scenecode/scenario.hpp"

namespace scenecode {

struct RenderStyle {
  int width{800};
  int height{800};
  double margin{20.0};
  std::string lane_color{"#b0b0b0"};
  std::vector<std::string> vehicle_colors{"#d62728", "#1f77b4", "#2ca02c", "#ff7f0e",
                                          "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  /// Opacity of the first timestep; the last is drawn fully opaque.
  double min_alpha{0.15};

  void validate() const;
};

nlohmann::json render_style_to_json(const RenderStyle& s);
RenderStyle render_style_from_json(const nlohmann::json& j);

std::string render_svg(const Scenario& s, const RenderStyle& style = {});
void write_svg(const Scenario& s, const std::string& path, const RenderStyle& style = {});

}  // namespace scenecode
