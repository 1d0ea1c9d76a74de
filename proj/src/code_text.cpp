#include "scenecode/code_text.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <optional>
#include <regex>
#include <sstream>

namespace scenecode {

namespace {

template <std::size_t N>
void write_list(std::ostringstream& os, const std::array<int, N>& values) {
  os << '[';
  for (std::size_t i = 0; i < N; ++i) {
    if (i) os << ',';
    os << values[i];
  }
  os << ']';
}

enum class Section { none, vehicle, map, interaction };

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::optional<Section> header_of(std::string_view line) {
  static const std::regex kHeader(R"(^[\s#*>_\-]*(vehicle|map|interaction)\s+codes?\b)",
                                  std::regex::icase);
  std::cmatch m;
  if (!std::regex_search(line.begin(), line.end(), m, kHeader)) return std::nullopt;
  std::string word = m[1].str();
  std::transform(word.begin(), word.end(), word.begin(), [](unsigned char c) { return std::tolower(c); });
  if (word == "vehicle") return Section::vehicle;
  if (word == "map") return Section::map;
  return Section::interaction;
}

std::vector<int> parse_cells(std::string_view body, std::size_t line_no) {
  std::vector<int> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = body.find(',', start);
    std::string_view cell = trim(body.substr(start, comma == std::string_view::npos ? body.npos : comma - start));
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() ||
        value != std::floor(value) || std::abs(value) > 1e6) {
      throw CodeParseError("line " + std::to_string(line_no) + ": non-numeric cell '" +
                           std::string(cell) + "'");
    }
    out.push_back(static_cast<int>(value));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

struct RawEntry {
  std::size_t line_no{0};
  std::vector<int> first;
  std::vector<int> second;
};

class Clamper {
 public:
  explicit Clamper(std::vector<std::string>& warnings) : warnings_(warnings) {}

  int operator()(int v, int lo, int hi, const std::string& where) {
    if (v < lo || v > hi) {
      const int c = std::clamp(v, lo, hi);
      warnings_.push_back(where + ": value " + std::to_string(v) + " clamped to " + std::to_string(c));
      return c;
    }
    return v;
  }

  void note(std::string w) { warnings_.push_back(std::move(w)); }

 private:
  std::vector<std::string>& warnings_;
};

}  // namespace

std::string serialize_codes(const CodeBundle& b) {
  std::ostringstream os;
  os << "Vehicle Code:\n";
  for (std::size_t i = 0; i < b.vehicle_codes.size(); ++i) {
    os << "- 'V" << i + 1 << "': ";
    write_list(os, b.vehicle_codes[i].flatten());
    os << '\n';
  }
  os << "\nMap Code:\n- 'Map': ";
  write_list(os, b.map_code.flatten());
  os << "\n\nInteraction Code:\n";
  for (std::size_t i = 0; i < b.interaction_codes.size(); ++i) {
    const InteractionCode& c = b.interaction_codes[i];
    os << "- 'I" << i + 1 << "': ";
    write_list(os, c.distance_bins);
    os << " | ";
    write_list(os, c.direction_sectors);
    os << '\n';
  }
  return os.str();
}

ParsedCodes parse_codes(std::string_view text, int interaction_areas) {
  static const std::regex kVehicle(R"(['"`]?\bV(\d+)['"`]?\s*:\s*\[([^\]]*)\])", std::regex::icase);
  static const std::regex kMap(R"(['"`]?\bMap['"`]?\s*:\s*\[([^\]]*)\])", std::regex::icase);
  static const std::regex kInteraction(
      R"(['"`]?\bI(\d+)['"`]?\s*:\s*\[([^\]]*)\](?:\s*\|\s*\[([^\]]*)\])?)", std::regex::icase);

  std::map<int, RawEntry> vehicles;
  std::map<int, RawEntry> interactions;
  std::optional<RawEntry> map_entry;
  bool seen_vehicle = false;
  bool seen_map = false;
  bool seen_interaction = false;

  ParsedCodes result;
  Clamper clamp(result.warnings);

  Section section = Section::none;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    if (trim(line).starts_with("```")) continue;
    if (auto h = header_of(line)) {
      section = *h;
      seen_vehicle |= section == Section::vehicle;
      seen_map |= section == Section::map;
      seen_interaction |= section == Section::interaction;
    }

    std::cmatch m;
    switch (section) {
      case Section::vehicle:
        if (std::regex_search(line.begin(), line.end(), m, kVehicle)) {
          const int k = std::stoi(m[1].str());
          if (vehicles.contains(k)) clamp.note("V" + std::to_string(k) + " repeated; last one kept");
          vehicles[k] = {line_no, parse_cells(m[2].str(), line_no), {}};
        }
        break;
      case Section::map:
        if (std::regex_search(line.begin(), line.end(), m, kMap)) {
          if (map_entry) clamp.note("Map repeated; last one kept");
          map_entry = RawEntry{line_no, parse_cells(m[1].str(), line_no), {}};
        }
        break;
      case Section::interaction:
        if (std::regex_search(line.begin(), line.end(), m, kInteraction)) {
          const int k = std::stoi(m[1].str());
          if (!m[3].matched) {
            throw CodeParseError("line " + std::to_string(line_no) +
                                 ": interaction code needs two lists separated by '|'");
          }
          if (interactions.contains(k)) clamp.note("I" + std::to_string(k) + " repeated; last one kept");
          interactions[k] = {line_no, parse_cells(m[2].str(), line_no), parse_cells(m[3].str(), line_no)};
        }
        break;
      case Section::none:
        break;
    }
  }

  if (!seen_vehicle || vehicles.empty()) throw CodeParseError("missing section: Vehicle Code");
  if (!seen_map || !map_entry) throw CodeParseError("missing section: Map Code");
  if (!seen_interaction || interactions.empty()) throw CodeParseError("missing section: Interaction Code");
  if (vehicles.size() != interactions.size()) {
    throw CodeParseError("count mismatch: " + std::to_string(vehicles.size()) + " vehicle codes vs " +
                         std::to_string(interactions.size()) + " interaction codes");
  }
  if (vehicles.size() > kMaxVehicles) {
    throw CodeParseError("vehicle count " + std::to_string(vehicles.size()) + " exceeds 32");
  }

  // Map code.
  {
    const RawEntry& e = *map_entry;
    if (e.first.size() != kMapCodeLength) {
      throw CodeParseError("line " + std::to_string(e.line_no) + ": map code must have 6 values, got " +
                           std::to_string(e.first.size()));
    }
    MapCode& mc = result.bundle.map_code;
    mc.same_dir_lanes = clamp(e.first[0], 1, static_cast<int>(kMaxLanes), "Map dim 0");
    mc.opposite_dir_lanes = clamp(e.first[1], 0, static_cast<int>(kMaxLanes), "Map dim 1");
    mc.perp_up_lanes = clamp(e.first[2], 0, static_cast<int>(kMaxLanes), "Map dim 2");
    mc.perp_down_lanes = clamp(e.first[3], 0, static_cast<int>(kMaxLanes), "Map dim 3");
    mc.dist_to_intersection_bin = clamp(e.first[4], -1, kIntersectionDistanceMaxBin, "Map dim 4");
    mc.ego_lane_id = clamp(e.first[5], 1, mc.same_dir_lanes, "Map dim 5");
  }

  std::size_t index = 0;
  for (const auto& [k, e] : vehicles) {
    const std::string where = "V" + std::to_string(k);
    if (e.first.size() != kVehicleCodeLength) {
      throw CodeParseError("line " + std::to_string(e.line_no) + ": vehicle code must have 10 values, got " +
                           std::to_string(e.first.size()));
    }
    VehicleCode vc;
    if (index == 0) {
      if (e.first[0] != -1 || e.first[1] != 0 || e.first[2] != 0) {
        clamp.note(where + ": ego pose fields forced to [-1,0,0]");
      }
      vc.pos_sector = -1;
      vc.distance_bin = 0;
      vc.direction_class = 0;
    } else {
      vc.pos_sector = clamp(e.first[0], 0, kVehiclePositionAreas - 1, where + " dim 0");
      vc.distance_bin = clamp(e.first[1], 0, 3, where + " dim 1");
      vc.direction_class = clamp(e.first[2], 0, kDirectionClasses - 1, where + " dim 2");
    }
    for (int s = 0; s < kSpeedSamples; ++s) {
      vc.speed_bins[s] = clamp(e.first[3 + s], 0, 8, where + " dim " + std::to_string(3 + s));
    }
    vc.action = static_cast<TrajectoryType>(clamp(e.first[9], 0, kTrajectoryTypeCount - 1, where + " dim 9"));
    result.bundle.vehicle_codes.push_back(vc);
    ++index;
  }

  index = 0;
  for (const auto& [k, e] : interactions) {
    const std::string where = "I" + std::to_string(k);
    if (e.first.size() != kInteractionSamples || e.second.size() != kInteractionSamples) {
      throw CodeParseError("line " + std::to_string(e.line_no) +
                           ": interaction codes must have 5 values each");
    }
    InteractionCode ic;
    if (index == 0) {
      const bool zero = std::all_of(e.first.begin(), e.first.end(), [](int v) { return v == 0; }) &&
                        std::all_of(e.second.begin(), e.second.end(), [](int v) { return v == 0; });
      if (!zero) clamp.note(where + ": ego interaction code forced to zeros");
    } else {
      for (int s = 0; s < kInteractionSamples; ++s) {
        ic.distance_bins[s] = clamp(e.first[s], 0, kInteractionDistanceMaxBin, where + " distance");
        ic.direction_sectors[s] = clamp(e.second[s], 0, interaction_areas - 1, where + " sector");
      }
    }
    result.bundle.interaction_codes.push_back(ic);
    ++index;
  }
  return result;
}

}  // namespace scenecode
