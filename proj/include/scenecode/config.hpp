// Run configuration file: one JSON object with optional sections
// "codec", "decoder", "train", "metrics", "llm" and "render". Unknown
// sections and fields are rejected by name.
#pragma once

#include <string>

#include <json.hpp>

#include "scenecode/codec.hpp"
#include "scenecode/decoder.hpp"
#include "scenecode/llm_client.hpp"
#include "scenecode/metrics.hpp"
#include "scenecode/render.hpp"
#include "scenecode/training.hpp"

namespace scenecode {

struct RunConfig {
  CodecConfig codec;
  DecoderConfig decoder;
  TrainConfig train;
  MetricConfig metrics;
  llm::ProviderConfig llm;
  RenderStyle render;
  /// Whether the file set a "decoder" section explicitly.
  bool decoder_given{false};
};

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& c);
/// An empty path yields the defaults.
RunConfig load_run_config(const std::string& path);

}  // namespace scenecode
