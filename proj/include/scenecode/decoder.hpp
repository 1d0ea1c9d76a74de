// Code-to-trajectory decoder: map, vehicle and interaction feature
// extraction, two-step attention aggregation, and one generation head per
// trajectory type.
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "scenecode/codec.hpp"
#include "scenecode/nn/attention.hpp"
#include "scenecode/nn/layers.hpp"
#include "scenecode/nn/mcg.hpp"
#include "scenecode/nn/param_store.hpp"
#include "scenecode/scenario.hpp"

namespace scenecode {

using nn::Matrix;

/// Per-lane attributes: 10 arc-length resampled centerline points (20
/// values), a one-hot direction class (4) and the normalized lane id (1).
inline constexpr int kLanePointSamples = 10;
inline constexpr int kLaneAttributeDim = 2 * kLanePointSamples + 4 + 1;

struct DecoderConfig {
  int lane_dim{256};
  int vehicle_dim{256};
  int interaction_dim{256};
  int mcg_layers{5};
  int map_agg_heads{4};
  int map_agg_layers{2};
  int interaction_agg_heads{8};
  int interaction_agg_layers{1};
  int head_hidden{512};
  int max_lanes{static_cast<int>(kMaxLanes)};
  int timesteps{static_cast<int>(kTimesteps)};
  int pe_frequencies{4};
  /// Head outputs are multiplied by this to give offsets in meters.
  double offset_scale{10.0};
  /// Lane coordinates are divided by this before encoding.
  double lane_coord_scale{50.0};

  /// Throws InvalidInputError naming the offending field.
  void validate() const;

  /// Small dimensions for gradient checks and desk-scale training.
  static DecoderConfig shrink(int timesteps = 5, int max_lanes = 8);

  friend bool operator==(const DecoderConfig&, const DecoderConfig&) = default;
};

nlohmann::json decoder_config_to_json(const DecoderConfig& c);
DecoderConfig decoder_config_from_json(const nlohmann::json& j);

struct LaneFeatureMatrix {
  Matrix features;          // max_lanes x kLaneAttributeDim, zero rows for absent lanes
  std::vector<bool> valid;  // the validity column
};

LaneFeatureMatrix lane_attributes(const LaneMap& map, int max_lanes, double coord_scale);
LaneFeatureMatrix lane_attributes(const LaneMap& map, int max_lanes);

/// Initial placement decoded from vehicle codes: the ego sits at the origin
/// facing +x; others sit at their distance-bin center along their sector's
/// center bearing, facing their direction class, moving at their first
/// speed-bin center (zero when stopped).
std::vector<VehicleState> initial_states_from_codes(const CodeBundle& b, const CodecConfig& cfg);

Eigen::MatrixXi vehicle_code_matrix(const CodeBundle& b);
Eigen::MatrixXi interaction_code_matrix(const CodeBundle& b);

struct DecoderInput {
  LaneFeatureMatrix lanes;
  Eigen::MatrixXi vehicle_codes;      // N x 10
  Eigen::MatrixXi interaction_codes;  // N x 10
  std::vector<TrajectoryType> types;
  Matrix anchors;                     // N x 2 initial positions
};

DecoderInput make_decoder_input(const CodeBundle& b, const LaneMap& map, const DecoderConfig& dc,
                                const CodecConfig& cc);

struct MapEncoderCache {
  nn::McgStackCache mcg;
};

struct EmbedCache {
  nn::MlpCache vehicle;
  nn::MlpCache interaction;
};

struct AggregateCache {
  std::vector<nn::AttentionCache> map_to_interaction, map_to_vehicle, interaction_to_vehicle;
  std::vector<nn::LayerNormCache> norm_interaction, norm_vehicle, norm_fused;
  bool filled{false};
};

struct GenerateCache {
  std::vector<nn::MlpCache> heads;
  std::vector<TrajectoryType> types;
  bool filled{false};
};

struct DecoderCache {
  MapEncoderCache map;
  EmbedCache embed;
  AggregateCache aggregate;
  GenerateCache generate;
  std::vector<bool> lane_mask;
  bool filled{false};
};

class DecoderModel {
 public:
  DecoderModel(const DecoderConfig& config, std::uint64_t seed);

  DecoderModel(const DecoderModel&) = delete;
  DecoderModel& operator=(const DecoderModel&) = delete;
  DecoderModel(DecoderModel&&) = default;
  DecoderModel& operator=(DecoderModel&&) = default;

  [[nodiscard]] const DecoderConfig& config() const { return config_; }
  [[nodiscard]] nn::ParamStore& params() { return store_; }
  [[nodiscard]] const nn::ParamStore& params() const { return store_; }

  /// E_M: max_lanes x lane_dim.
  Matrix encode_map(const LaneFeatureMatrix& lanes, MapEncoderCache* cache) const;
  /// (E_V, E_I): N x vehicle_dim and N x interaction_dim.
  std::pair<Matrix, Matrix> embed_codes(const Eigen::MatrixXi& vehicle_codes,
                                        const Eigen::MatrixXi& interaction_codes, EmbedCache* cache) const;
  /// Map into interactions and vehicles, then interactions into vehicles.
  Matrix aggregate(const Matrix& map_features, const std::vector<bool>& lane_mask, const Matrix& vehicle_features,
                   const Matrix& interaction_features, AggregateCache* cache) const;
  /// Offsets in meters, N x 2T laid out as x0, y0, x1, y1, ...
  Matrix generate(const Matrix& fused, const std::vector<TrajectoryType>& types, GenerateCache* cache) const;

  /// Absolute positions, N x 2T.
  Matrix forward(const DecoderInput& input, DecoderCache* cache) const;
  /// Accumulates parameter gradients for d(loss)/d(positions).
  void backward(const DecoderCache& cache, const Matrix& d_positions);

 private:
  DecoderConfig config_;
  nn::ParamStore store_;
  nn::McgStack map_encoder_;
  nn::Mlp vehicle_mlp_;
  nn::Mlp interaction_mlp_;
  std::vector<nn::MultiHeadAttention> map_to_interaction_, map_to_vehicle_, interaction_to_vehicle_;
  std::vector<nn::LayerNorm> norm_interaction_, norm_vehicle_, norm_fused_;
  std::vector<nn::Mlp> heads_;
};

/// Decodes a code bundle on the given map into a full scenario.
Scenario decode(const CodeBundle& bundle, const LaneMap& map, const DecoderModel& model,
                const CodecConfig& cfg = {});

}  // namespace scenecode
