#include "scenecode/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace scenecode {

void DecoderConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& rule) {
    throw InvalidInputError("decoder config field '" + field + "': " + rule);
  };
  if (lane_dim < 1) fail("lane_dim", "must be >= 1");
  if (vehicle_dim < 1) fail("vehicle_dim", "must be >= 1");
  if (interaction_dim < 1) fail("interaction_dim", "must be >= 1");
  if (mcg_layers < 1) fail("mcg_layers", "must be >= 1");
  if (map_agg_heads < 1 || vehicle_dim % map_agg_heads != 0 || interaction_dim % map_agg_heads != 0) {
    fail("map_agg_heads", "must divide vehicle_dim and interaction_dim");
  }
  if (interaction_agg_heads < 1 || vehicle_dim % interaction_agg_heads != 0) {
    fail("interaction_agg_heads", "must divide vehicle_dim");
  }
  if (map_agg_layers < 1) fail("map_agg_layers", "must be >= 1");
  if (interaction_agg_layers < 1) fail("interaction_agg_layers", "must be >= 1");
  if (head_hidden < 1) fail("head_hidden", "must be >= 1");
  if (max_lanes < 1 || max_lanes > static_cast<int>(kMaxLanes)) fail("max_lanes", "must be in [1, 384]");
  if (timesteps < 1) fail("timesteps", "must be >= 1");
  if (pe_frequencies < 1) fail("pe_frequencies", "must be >= 1");
  if (!(offset_scale > 0.0)) fail("offset_scale", "must be > 0");
  if (!(lane_coord_scale > 0.0)) fail("lane_coord_scale", "must be > 0");
}

DecoderConfig DecoderConfig::shrink(int timesteps, int max_lanes) {
  DecoderConfig c;
  c.lane_dim = 16;
  c.vehicle_dim = 16;
  c.interaction_dim = 16;
  c.mcg_layers = 2;
  c.map_agg_heads = 4;
  c.map_agg_layers = 2;
  c.interaction_agg_heads = 8;
  c.interaction_agg_layers = 1;
  c.head_hidden = 32;
  c.max_lanes = max_lanes;
  c.timesteps = timesteps;
  c.pe_frequencies = 2;
  return c;
}

nlohmann::json decoder_config_to_json(const DecoderConfig& c) {
  return {{"lane_dim", c.lane_dim},
          {"vehicle_dim", c.vehicle_dim},
          {"interaction_dim", c.interaction_dim},
          {"mcg_layers", c.mcg_layers},
          {"map_agg_heads", c.map_agg_heads},
          {"map_agg_layers", c.map_agg_layers},
          {"interaction_agg_heads", c.interaction_agg_heads},
          {"interaction_agg_layers", c.interaction_agg_layers},
          {"head_hidden", c.head_hidden},
          {"max_lanes", c.max_lanes},
          {"timesteps", c.timesteps},
          {"pe_frequencies", c.pe_frequencies},
          {"offset_scale", c.offset_scale},
          {"lane_coord_scale", c.lane_coord_scale}};
}

DecoderConfig decoder_config_from_json(const nlohmann::json& j) {
  DecoderConfig c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "lane_dim") c.lane_dim = value.get<int>();
      else if (key == "vehicle_dim") c.vehicle_dim = value.get<int>();
      else if (key == "interaction_dim") c.interaction_dim = value.get<int>();
      else if (key == "mcg_layers") c.mcg_layers = value.get<int>();
      else if (key == "map_agg_heads") c.map_agg_heads = value.get<int>();
      else if (key == "map_agg_layers") c.map_agg_layers = value.get<int>();
      else if (key == "interaction_agg_heads") c.interaction_agg_heads = value.get<int>();
      else if (key == "interaction_agg_layers") c.interaction_agg_layers = value.get<int>();
      else if (key == "head_hidden") c.head_hidden = value.get<int>();
      else if (key == "max_lanes") c.max_lanes = value.get<int>();
      else if (key == "timesteps") c.timesteps = value.get<int>();
      else if (key == "pe_frequencies") c.pe_frequencies = value.get<int>();
      else if (key == "offset_scale") c.offset_scale = value.get<double>();
      else if (key == "lane_coord_scale") c.lane_coord_scale = value.get<double>();
      else throw InvalidInputError("unknown decoder config field '" + key + "'");
    } catch (const nlohmann::json::exception&) {
      throw InvalidInputError("decoder config field '" + key + "' has the wrong type");
    }
  }
  c.validate();
  return c;
}

namespace {

std::vector<Vec2> resample_by_arc_length(const std::vector<Vec2>& line, int samples) {
  std::vector<double> cumulative(line.size(), 0.0);
  for (std::size_t i = 1; i < line.size(); ++i) {
    cumulative[i] = cumulative[i - 1] + (line[i] - line[i - 1]).norm();
  }
  const double total = cumulative.back();
  std::vector<Vec2> out;
  out.reserve(samples);
  std::size_t seg = 0;
  for (int k = 0; k < samples; ++k) {
    const double target = samples == 1 ? 0.0 : total * k / (samples - 1);
    while (seg + 2 < line.size() && cumulative[seg + 1] < target) ++seg;
    const double len = cumulative[seg + 1] - cumulative[seg];
    const double t = len > 0.0 ? std::clamp((target - cumulative[seg]) / len, 0.0, 1.0) : 0.0;
    out.push_back(line[seg] + t * (line[seg + 1] - line[seg]));
  }
  return out;
}

}  // namespace

LaneFeatureMatrix lane_attributes(const LaneMap& map, int max_lanes, double coord_scale) {
  if (static_cast<int>(map.lanes.size()) > max_lanes) {
    throw nn::ShapeError("map has " + std::to_string(map.lanes.size()) + " lanes, decoder supports " +
                         std::to_string(max_lanes));
  }
  std::array<int, 4> per_direction{};
  for (const Lane& lane : map.lanes) ++per_direction[static_cast<int>(lane.direction_class)];

  LaneFeatureMatrix out;
  out.features = Matrix::Zero(max_lanes, kLaneAttributeDim);
  out.valid.assign(max_lanes, false);
  for (std::size_t i = 0; i < map.lanes.size(); ++i) {
    const Lane& lane = map.lanes[i];
    if (lane.centerline.size() < 2) throw InvalidInputError("lane " + std::to_string(i) + " has < 2 points");
    const auto pts = resample_by_arc_length(lane.centerline, kLanePointSamples);
    const auto r = static_cast<Eigen::Index>(i);
    for (int k = 0; k < kLanePointSamples; ++k) {
      out.features(r, 2 * k) = pts[k].x / coord_scale;
      out.features(r, 2 * k + 1) = pts[k].y / coord_scale;
    }
    const int dir = static_cast<int>(lane.direction_class);
    out.features(r, 2 * kLanePointSamples + dir) = 1.0;
    out.features(r, 2 * kLanePointSamples + 4) =
        static_cast<double>(lane.lane_id_from_right) / std::max(per_direction[dir], 1);
    out.valid[i] = true;
  }
  return out;
}

LaneFeatureMatrix lane_attributes(const LaneMap& map, int max_lanes) {
  return lane_attributes(map, max_lanes, DecoderConfig{}.lane_coord_scale);
}

std::vector<VehicleState> initial_states_from_codes(const CodeBundle& b, const CodecConfig& cfg) {
  std::vector<VehicleState> out;
  for (std::size_t i = 0; i < b.vehicle_codes.size(); ++i) {
    const VehicleCode& vc = b.vehicle_codes[i];
    VehicleState s;
    if (i > 0) {
      const double bearing = -vc.pos_sector * (2.0 * std::numbers::pi / kVehiclePositionAreas);
      const double distance = (vc.distance_bin + 0.5) * cfg.vehicle_distance_gap;
      s.initial_position = {distance * std::cos(bearing), distance * std::sin(bearing)};
      switch (vc.direction_class) {
        case 1: s.initial_heading = {-1.0, 0.0}; break;
        case 2: s.initial_heading = {0.0, 1.0}; break;
        case 3: s.initial_heading = {0.0, -1.0}; break;
        default: s.initial_heading = {1.0, 0.0}; break;
      }
    }
    s.initial_speed = vc.action == TrajectoryType::stop ? 0.0 : (vc.speed_bins[0] + 0.5) * cfg.speed_gap;
    out.push_back(s);
  }
  return out;
}

Eigen::MatrixXi vehicle_code_matrix(const CodeBundle& b) {
  Eigen::MatrixXi m(static_cast<Eigen::Index>(b.vehicle_codes.size()), kVehicleCodeLength);
  for (std::size_t i = 0; i < b.vehicle_codes.size(); ++i) {
    const auto flat = b.vehicle_codes[i].flatten();
    for (int k = 0; k < kVehicleCodeLength; ++k) m(static_cast<Eigen::Index>(i), k) = flat[k];
  }
  return m;
}

Eigen::MatrixXi interaction_code_matrix(const CodeBundle& b) {
  Eigen::MatrixXi m(static_cast<Eigen::Index>(b.interaction_codes.size()), 2 * kInteractionSamples);
  for (std::size_t i = 0; i < b.interaction_codes.size(); ++i) {
    const auto flat = b.interaction_codes[i].flatten();
    for (int k = 0; k < 2 * kInteractionSamples; ++k) m(static_cast<Eigen::Index>(i), k) = flat[k];
  }
  return m;
}

DecoderInput make_decoder_input(const CodeBundle& b, const LaneMap& map, const DecoderConfig& dc,
                                const CodecConfig& cc) {
  const auto problems = validate_bundle(b, cc.interaction_areas);
  if (!problems.empty()) throw InvalidInputError("invalid code bundle: " + problems.front());
  DecoderInput in;
  in.lanes = lane_attributes(map, dc.max_lanes, dc.lane_coord_scale);
  in.vehicle_codes = vehicle_code_matrix(b);
  in.interaction_codes = interaction_code_matrix(b);
  const auto states = initial_states_from_codes(b, cc);
  in.anchors.resize(static_cast<Eigen::Index>(states.size()), 2);
  for (std::size_t i = 0; i < states.size(); ++i) {
    in.anchors(static_cast<Eigen::Index>(i), 0) = states[i].initial_position.x;
    in.anchors(static_cast<Eigen::Index>(i), 1) = states[i].initial_position.y;
    in.types.push_back(b.vehicle_codes[i].action);
  }
  return in;
}

DecoderModel::DecoderModel(const DecoderConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  nn::Rng rng(seed);
  const DecoderConfig& c = config_;
  const int pe_width = kVehicleCodeLength * 2 * c.pe_frequencies;

  map_encoder_ = nn::McgStack(store_, "map_encoder", kLaneAttributeDim, c.lane_dim, c.mcg_layers, rng);
  vehicle_mlp_ = nn::Mlp(store_, "vehicle_mlp", {pe_width, c.vehicle_dim, c.vehicle_dim}, rng);
  interaction_mlp_ = nn::Mlp(store_, "interaction_mlp", {pe_width, c.interaction_dim, c.interaction_dim}, rng);
  for (int l = 0; l < c.map_agg_layers; ++l) {
    const std::string s = std::to_string(l);
    map_to_interaction_.emplace_back(store_, "map_to_interaction." + s, c.interaction_dim, c.lane_dim,
                                     c.map_agg_heads, rng);
    norm_interaction_.emplace_back(store_, "norm_interaction." + s, c.interaction_dim, rng);
    map_to_vehicle_.emplace_back(store_, "map_to_vehicle." + s, c.vehicle_dim, c.lane_dim, c.map_agg_heads, rng);
    norm_vehicle_.emplace_back(store_, "norm_vehicle." + s, c.vehicle_dim, rng);
  }
  for (int l = 0; l < c.interaction_agg_layers; ++l) {
    const std::string s = std::to_string(l);
    interaction_to_vehicle_.emplace_back(store_, "interaction_to_vehicle." + s, c.vehicle_dim, c.interaction_dim,
                                         c.interaction_agg_heads, rng);
    norm_fused_.emplace_back(store_, "norm_fused." + s, c.vehicle_dim, rng);
  }
  for (int t = 0; t < kTrajectoryTypeCount; ++t) {
    heads_.emplace_back(store_, "head." + std::string(to_string(static_cast<TrajectoryType>(t))),
                        std::vector<int>{c.vehicle_dim, c.head_hidden, 2 * c.timesteps}, rng);
  }
}

Matrix DecoderModel::encode_map(const LaneFeatureMatrix& lanes, MapEncoderCache* cache) const {
  if (lanes.features.rows() != config_.max_lanes || lanes.features.cols() != kLaneAttributeDim) {
    throw nn::ShapeError("encode_map: expected " + std::to_string(config_.max_lanes) + "x" +
                         std::to_string(kLaneAttributeDim) + " lane features");
  }
  return map_encoder_.forward(lanes.features, lanes.valid, cache ? &cache->mcg : nullptr).elements;
}

std::pair<Matrix, Matrix> DecoderModel::embed_codes(const Eigen::MatrixXi& vehicle_codes,
                                                    const Eigen::MatrixXi& interaction_codes,
                                                    EmbedCache* cache) const {
  if (vehicle_codes.cols() != kVehicleCodeLength || interaction_codes.cols() != 2 * kInteractionSamples ||
      vehicle_codes.rows() != interaction_codes.rows()) {
    throw nn::ShapeError("embed_codes: expected matching N x 10 code matrices");
  }
  Matrix ev = vehicle_mlp_.forward(nn::positional_encode(vehicle_codes, config_.pe_frequencies),
                                   cache ? &cache->vehicle : nullptr);
  Matrix ei = interaction_mlp_.forward(nn::positional_encode(interaction_codes, config_.pe_frequencies),
                                       cache ? &cache->interaction : nullptr);
  return {std::move(ev), std::move(ei)};
}

Matrix DecoderModel::aggregate(const Matrix& map_features, const std::vector<bool>& lane_mask,
                               const Matrix& vehicle_features, const Matrix& interaction_features,
                               AggregateCache* cache) const {
  if (vehicle_features.rows() != interaction_features.rows()) {
    throw nn::ShapeError("aggregate: vehicle and interaction row counts differ");
  }
  const std::size_t l1 = map_to_vehicle_.size();
  const std::size_t l2 = interaction_to_vehicle_.size();
  if (cache) {
    cache->map_to_interaction.assign(l1, {});
    cache->map_to_vehicle.assign(l1, {});
    cache->norm_interaction.assign(l1, {});
    cache->norm_vehicle.assign(l1, {});
    cache->interaction_to_vehicle.assign(l2, {});
    cache->norm_fused.assign(l2, {});
    cache->filled = true;
  }
  Matrix ei = interaction_features;
  Matrix ev = vehicle_features;
  for (std::size_t l = 0; l < l1; ++l) {
    const Matrix ai = map_to_interaction_[l].forward(ei, map_features, map_features, lane_mask,
                                                     cache ? &cache->map_to_interaction[l] : nullptr);
    ei = norm_interaction_[l].forward(ei + ai, cache ? &cache->norm_interaction[l] : nullptr);
    const Matrix av = map_to_vehicle_[l].forward(ev, map_features, map_features, lane_mask,
                                                 cache ? &cache->map_to_vehicle[l] : nullptr);
    ev = norm_vehicle_[l].forward(ev + av, cache ? &cache->norm_vehicle[l] : nullptr);
  }
  for (std::size_t l = 0; l < l2; ++l) {
    const Matrix a = interaction_to_vehicle_[l].forward(ev, ei, ei, {},
                                                        cache ? &cache->interaction_to_vehicle[l] : nullptr);
    ev = norm_fused_[l].forward(ev + a, cache ? &cache->norm_fused[l] : nullptr);
  }
  return ev;
}

Matrix DecoderModel::generate(const Matrix& fused, const std::vector<TrajectoryType>& types,
                              GenerateCache* cache) const {
  if (static_cast<Eigen::Index>(types.size()) != fused.rows()) {
    throw nn::ShapeError("generate: one trajectory type per vehicle is required");
  }
  if (cache) {
    cache->heads.assign(types.size(), {});
    cache->types = types;
    cache->filled = true;
  }
  Matrix out(fused.rows(), 2 * config_.timesteps);
  for (Eigen::Index i = 0; i < fused.rows(); ++i) {
    const int t = static_cast<int>(types[i]);
    if (t < 0 || t >= kTrajectoryTypeCount) {
      throw InvalidInputError("generate: unknown trajectory type " + std::to_string(t));
    }
    out.row(i) = heads_[t].forward(Matrix(fused.row(i)), cache ? &cache->heads[i] : nullptr).row(0) *
                 config_.offset_scale;
  }
  return out;
}

Matrix DecoderModel::forward(const DecoderInput& input, DecoderCache* cache) const {
  const Eigen::Index n = input.vehicle_codes.rows();
  if (input.anchors.rows() != n || input.anchors.cols() != 2 || static_cast<Eigen::Index>(input.types.size()) != n) {
    throw nn::ShapeError("decoder input: anchors and types must have one row per vehicle");
  }
  const Matrix em = encode_map(input.lanes, cache ? &cache->map : nullptr);
  auto [ev, ei] = embed_codes(input.vehicle_codes, input.interaction_codes, cache ? &cache->embed : nullptr);
  const Matrix fused = aggregate(em, input.lanes.valid, ev, ei, cache ? &cache->aggregate : nullptr);
  Matrix positions = generate(fused, input.types, cache ? &cache->generate : nullptr);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int t = 0; t < config_.timesteps; ++t) {
      positions(i, 2 * t) += input.anchors(i, 0);
      positions(i, 2 * t + 1) += input.anchors(i, 1);
    }
  }
  if (cache) {
    cache->lane_mask = input.lanes.valid;
    cache->filled = true;
  }
  return positions;
}

void DecoderModel::backward(const DecoderCache& cache, const Matrix& d_positions) {
  if (!cache.filled || !cache.generate.filled || !cache.aggregate.filled) {
    throw nn::MissingCacheError("decoder: backward called without a forward cache");
  }
  // Heads.
  const Eigen::Index n = d_positions.rows();
  Matrix d_fused(n, config_.vehicle_dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int t = static_cast<int>(cache.generate.types[i]);
    d_fused.row(i) =
        heads_[t].backward(cache.generate.heads[i], Matrix(d_positions.row(i) * config_.offset_scale)).row(0);
  }

  // Aggregation, in reverse.
  const AggregateCache& ac = cache.aggregate;
  Matrix dev = d_fused;
  Matrix dei = Matrix::Zero(n, config_.interaction_dim);
  Matrix dem = Matrix::Zero(config_.max_lanes, config_.lane_dim);
  for (std::size_t l = interaction_to_vehicle_.size(); l-- > 0;) {
    const Matrix dpre = norm_fused_[l].backward(ac.norm_fused[l], dev);
    const nn::AttentionGrads g = interaction_to_vehicle_[l].backward(ac.interaction_to_vehicle[l], dpre);
    dev = dpre + g.dq;
    dei += g.dk + g.dv;
  }
  for (std::size_t l = map_to_vehicle_.size(); l-- > 0;) {
    const Matrix dpre_v = norm_vehicle_[l].backward(ac.norm_vehicle[l], dev);
    const nn::AttentionGrads gv = map_to_vehicle_[l].backward(ac.map_to_vehicle[l], dpre_v);
    dev = dpre_v + gv.dq;
    dem += gv.dk + gv.dv;
    const Matrix dpre_i = norm_interaction_[l].backward(ac.norm_interaction[l], dei);
    const nn::AttentionGrads gi = map_to_interaction_[l].backward(ac.map_to_interaction[l], dpre_i);
    dei = dpre_i + gi.dq;
    dem += gi.dk + gi.dv;
  }

  vehicle_mlp_.backward(cache.embed.vehicle, dev);
  interaction_mlp_.backward(cache.embed.interaction, dei);
  map_encoder_.backward(cache.map.mcg, dem, nn::RowVector::Zero(config_.lane_dim));
}

Scenario decode(const CodeBundle& bundle, const LaneMap& map, const DecoderModel& model, const CodecConfig& cfg) {
  if (model.config().timesteps != static_cast<int>(kTimesteps)) {
    throw InvalidInputError("decode: model generates " + std::to_string(model.config().timesteps) +
                            " timesteps, scenarios need " + std::to_string(kTimesteps));
  }
  const DecoderInput input = make_decoder_input(bundle, map, model.config(), cfg);
  const Matrix positions = model.forward(input, nullptr);
  auto states = initial_states_from_codes(bundle, cfg);

  Scenario s;
  s.map = map;
  for (Eigen::Index i = 0; i < positions.rows(); ++i) {
    std::vector<Vec2> pts(kTimesteps);
    for (std::size_t t = 0; t < kTimesteps; ++t) {
      pts[t] = {positions(i, 2 * static_cast<Eigen::Index>(t)), positions(i, 2 * static_cast<Eigen::Index>(t) + 1)};
    }
    VehicleState state = states[static_cast<std::size_t>(i)];
    state.initial_position = pts.front();
    s.vehicles.push_back(state);
    s.trajectories.push_back(Trajectory::from_positions(std::move(pts)));
  }
  return s;
}

}  // namespace scenecode
