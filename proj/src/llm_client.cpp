#include "scenecode/llm_client.hpp"

#include <cstdlib>
#include <regex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <openssl/evp.h>
#include <spdlog/spdlog.h>

namespace scenecode::llm {

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xf];
  }
  return out;
}

std::vector<ChatMessage> build_prompt(std::string_view description) {
  if (description.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    throw InvalidInputError("build_prompt: empty description");
  }
  return {{"system", std::string(system_prompt_text())}, {"user", std::string(description)}};
}

void ProviderConfig::validate() const {
  if (endpoint.empty()) throw InvalidInputError("provider config field 'endpoint': must not be empty");
  if (model.empty()) throw InvalidInputError("provider config field 'model': must not be empty");
  if (!(timeout_seconds > 0.0)) throw InvalidInputError("provider config field 'timeout_seconds': must be > 0");
  if (max_retries < 0) throw InvalidInputError("provider config field 'max_retries': must be >= 0");
  if (!(initial_backoff_seconds >= 0.0)) {
    throw InvalidInputError("provider config field 'initial_backoff_seconds': must be >= 0");
  }
}

nlohmann::json provider_config_to_json(const ProviderConfig& c) {
  return {{"endpoint", c.endpoint},
          {"model", c.model},
          {"auth_env", c.auth_env},
          {"timeout_seconds", c.timeout_seconds},
          {"max_retries", c.max_retries},
          {"initial_backoff_seconds", c.initial_backoff_seconds},
          {"temperature", c.temperature}};
}

ProviderConfig provider_config_from_json(const nlohmann::json& j) {
  ProviderConfig c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "endpoint") c.endpoint = value.get<std::string>();
      else if (key == "model") c.model = value.get<std::string>();
      else if (key == "auth_env") c.auth_env = value.get<std::string>();
      else if (key == "timeout_seconds") c.timeout_seconds = value.get<double>();
      else if (key == "max_retries") c.max_retries = value.get<int>();
      else if (key == "initial_backoff_seconds") c.initial_backoff_seconds = value.get<double>();
      else if (key == "temperature") c.temperature = value.get<double>();
      else throw InvalidInputError("unknown llm config field '" + key + "'");
    } catch (const nlohmann::json::exception&) {
      throw InvalidInputError("llm config field '" + key + "' has the wrong type");
    }
  }
  c.validate();
  return c;
}

std::string redact(std::string text, const std::string& secret) {
  if (secret.empty()) return text;
  for (auto pos = text.find(secret); pos != std::string::npos; pos = text.find(secret, pos + 3)) {
    text.replace(pos, secret.size(), "***");
  }
  return text;
}

namespace {

struct SplitUrl {
  std::string origin;
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw InvalidInputError("endpoint '" + url + "' has no scheme");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

HttpChatProvider::HttpChatProvider(ProviderConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  if (const char* t = std::getenv(cfg_.auth_env.c_str())) token_ = t;
}

std::string HttpChatProvider::complete(const std::vector<ChatMessage>& messages) {
  const SplitUrl url = split_url(cfg_.endpoint);
  nlohmann::json body{{"model", cfg_.model}, {"temperature", cfg_.temperature}, {"messages", nlohmann::json::array()}};
  for (const ChatMessage& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  const std::string payload = body.dump();

  httplib::Client client(url.origin);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::duration<double>(cfg_.timeout_seconds));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  httplib::Headers headers;
  if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
  spdlog::debug("POST {}{} Authorization: Bearer {} body: {}", url.origin, url.path, token_.empty() ? "" : "***",
                redact(payload, token_));

  auto res = client.Post(url.path, headers, payload, "application/json");
  if (!res) throw TransientProviderError("request to " + url.origin + " failed: " + httplib::to_string(res.error()));
  spdlog::debug("response {} body: {}", res->status, redact(res->body, token_));
  if (res->status == 429 || res->status >= 500) {
    throw TransientProviderError("endpoint returned HTTP " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw ProviderError("endpoint returned HTTP " + std::to_string(res->status) + ": " + redact(res->body, token_));
  }
  try {
    return nlohmann::json::parse(res->body).at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(std::string("unexpected response shape: ") + e.what());
  }
}

MockProvider::MockProvider(std::map<std::string, std::string> script, std::string fallback)
    : script_(std::move(script)), fallback_(std::move(fallback)) {}

std::string MockProvider::complete(const std::vector<ChatMessage>& messages) {
  ++calls_;
  requests_.push_back(messages);
  if (pending_failures_ > 0) {
    --pending_failures_;
    throw TransientProviderError("mock: scripted transient failure");
  }
  for (const ChatMessage& m : messages) {
    if (m.role != "user") continue;
    const auto it = script_.find(m.content);
    return it == script_.end() ? fallback_ : it->second;
  }
  return fallback_;
}

MockProvider mock_provider_from_json(const nlohmann::json& j) {
  std::map<std::string, std::string> script;
  std::string fallback;
  for (const auto& [key, value] : j.items()) {
    if (key == "fallback") {
      fallback = value.get<std::string>();
    } else if (key == "replies") {
      for (const auto& [description, reply] : value.items()) script[description] = reply.get<std::string>();
    } else {
      throw InvalidInputError("unknown mock script field '" + key + "'");
    }
  }
  return MockProvider(std::move(script), std::move(fallback));
}

namespace {

std::string call_with_retries(Provider& provider, const std::vector<ChatMessage>& messages,
                              const EncodeOptions& options) {
  auto backoff = options.initial_backoff;
  for (int attempt = 0;; ++attempt) {
    try {
      return provider.complete(messages);
    } catch (const TransientProviderError& e) {
      if (attempt >= options.max_retries) {
        throw ProviderError("provider failed after " + std::to_string(attempt + 1) + " attempts: " + e.what());
      }
      spdlog::warn("provider attempt {} failed ({}); retrying in {} ms", attempt + 1, e.what(), backoff.count());
      if (options.sleep) {
        options.sleep(backoff);
      } else {
        std::this_thread::sleep_for(backoff);
      }
      backoff *= 2;
    }
  }
}

std::size_t count_prose_lines(const std::string& reply) {
  static const std::regex kCodeLine(
      R"(^\s*(?:-\s*)?['"`]?(?:V\d+|I\d+|Map)['"`]?\s*:|^\s*(?:vehicle|map|interaction)\s+code\b|^\s*```|^\s*$)",
      std::regex::icase);
  std::istringstream in(reply);
  std::size_t prose = 0;
  for (std::string line; std::getline(in, line);) {
    if (!std::regex_search(line, kCodeLine)) ++prose;
  }
  return prose;
}

}  // namespace

EncodeResult encode_description(std::string_view description, Provider& provider, const EncodeOptions& options) {
  std::vector<ChatMessage> messages = build_prompt(description);
  std::string reply = call_with_retries(provider, messages, options);
  EncodeResult result;
  try {
    ParsedCodes parsed = parse_codes(reply, options.interaction_areas);
    result.bundle = std::move(parsed.bundle);
    result.warnings = std::move(parsed.warnings);
  } catch (const CodeParseError& first) {
    spdlog::info("reply did not parse ({}); asking for a repair", first.what());
    messages.push_back({"assistant", reply});
    messages.push_back({"user", std::string("The reply could not be parsed: ") + first.what() +
                                    ". Output only the Vehicle Code, Map Code and Interaction Code sections in the "
                                    "required format."});
    reply = call_with_retries(provider, messages, options);
    try {
      ParsedCodes parsed = parse_codes(reply, options.interaction_areas);
      result.bundle = std::move(parsed.bundle);
      result.warnings = std::move(parsed.warnings);
      result.warnings.insert(result.warnings.begin(), std::string("first reply failed to parse: ") + first.what());
    } catch (const CodeParseError& second) {
      throw EncodeError(std::string("reply failed to parse after one repair round: ") + second.what(), reply);
    }
  }
  const auto problems = validate_bundle(result.bundle, options.interaction_areas);
  if (!problems.empty()) throw EncodeError("parsed codes are invalid: " + problems.front(), reply);
  if (const std::size_t prose = count_prose_lines(reply); prose > 0) {
    result.warnings.push_back("reply had " + std::to_string(prose) + " line(s) of text outside the code sections");
  }
  result.raw_reply = std::move(reply);
  return result;
}

}  // namespace scenecode::llm
