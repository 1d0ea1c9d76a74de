#include "scenecode/config.hpp"

#include <fstream>

namespace scenecode {

RunConfig run_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidInputError("config must be a JSON object");
  RunConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "codec") c.codec = codec_config_from_json(value);
    else if (key == "decoder") c.decoder = decoder_config_from_json(value), c.decoder_given = true;
    else if (key == "train") c.train = train_config_from_json(value);
    else if (key == "metrics") c.metrics = metric_config_from_json(value);
    else if (key == "llm") c.llm = llm::provider_config_from_json(value);
    else if (key == "render") c.render = render_style_from_json(value);
    else throw InvalidInputError("unknown config section '" + key + "'");
  }
  return c;
}

nlohmann::json run_config_to_json(const RunConfig& c) {
  return {{"codec", codec_config_to_json(c.codec)},     {"decoder", decoder_config_to_json(c.decoder)},
          {"train", train_config_to_json(c.train)},     {"metrics", metric_config_to_json(c.metrics)},
          {"llm", llm::provider_config_to_json(c.llm)}, {"render", render_style_to_json(c.render)}};
}

RunConfig load_run_config(const std::string& path) {
  if (path.empty()) return {};
  std::ifstream in(path);
  if (!in) throw InvalidInputError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInputError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace scenecode
