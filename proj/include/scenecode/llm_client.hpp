// Language front end: prompt assembly, chat-completion providers and reply
// parsing into scene codes.
#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "scenecode/code_text.hpp"
#include "scenecode/codec.hpp"

namespace scenecode::llm {

/// The shipped system prompt, embedded at build time.
std::string_view system_prompt_text();

/// SHA-256 of the shipped prompt asset, lowercase hex.
inline constexpr std::string_view kPromptSha256 = "8fb701bcc1658cfa552c08919a9be79e63cfd7c3bfd6543b7c8e1e2bce2fe9f4";

std::string sha256_hex(std::string_view data);

struct ChatMessage {
  std::string role;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

/// [system: prompt asset, user: description]. Throws InvalidInputError for an
/// empty description.
std::vector<ChatMessage> build_prompt(std::string_view description);

class ProviderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A failure worth retrying: connection problems, rate limits, server errors.
class TransientProviderError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

class EncodeError : public std::runtime_error {
 public:
  EncodeError(const std::string& what, std::string raw_reply)
      : std::runtime_error(what), raw_reply_(std::move(raw_reply)) {}
  [[nodiscard]] const std::string& raw_reply() const { return raw_reply_; }

 private:
  std::string raw_reply_;
};

class Provider {
 public:
  virtual ~Provider() = default;
  /// Returns the assistant reply text.
  virtual std::string complete(const std::vector<ChatMessage>& messages) = 0;
};

struct ProviderConfig {
  std::string endpoint{"https://api.openai.com/v1/chat/completions"};
  std::string model{"gpt-4"};
  /// Name of the environment variable holding the bearer token.
  std::string auth_env{"OPENAI_API_KEY"};
  double timeout_seconds{60.0};
  int max_retries{3};
  double initial_backoff_seconds{1.0};
  double temperature{0.0};

  void validate() const;
};

nlohmann::json provider_config_to_json(const ProviderConfig& c);
ProviderConfig provider_config_from_json(const nlohmann::json& j);

/// OpenAI-style chat-completion endpoint over HTTP(S).
class HttpChatProvider : public Provider {
 public:
  explicit HttpChatProvider(ProviderConfig cfg);
  std::string complete(const std::vector<ChatMessage>& messages) override;

 private:
  ProviderConfig cfg_;
  std::string token_;
};

/// Deterministic offline provider. Replies are looked up by the first user
/// message; unknown descriptions get the fallback reply.
class MockProvider : public Provider {
 public:
  MockProvider(std::map<std::string, std::string> script, std::string fallback);

  std::string complete(const std::vector<ChatMessage>& messages) override;

  /// The next `n` calls throw TransientProviderError.
  void fail_next(int n) { pending_failures_ = n; }
  [[nodiscard]] int call_count() const { return calls_; }
  [[nodiscard]] const std::vector<std::vector<ChatMessage>>& requests() const { return requests_; }

 private:
  std::map<std::string, std::string> script_;
  std::string fallback_;
  int pending_failures_{0};
  int calls_{0};
  std::vector<std::vector<ChatMessage>> requests_;
};

/// Loads a mock script: {"fallback": "...", "replies": {"description": "reply", ...}}.
MockProvider mock_provider_from_json(const nlohmann::json& j);

struct EncodeOptions {
  int max_retries{3};
  std::chrono::milliseconds initial_backoff{1000};
  /// Injected so tests can observe backoff without waiting.
  std::function<void(std::chrono::milliseconds)> sleep;
  int interaction_areas{6};
};

struct EncodeResult {
  CodeBundle bundle;
  std::string raw_reply;
  std::vector<std::string> warnings;
};

/// Prompts the provider, retrying transient failures with exponential
/// backoff, and parses the reply. A reply that fails to parse gets one repair
/// round in which the parse error is sent back; a second failure throws
/// EncodeError carrying the raw reply.
EncodeResult encode_description(std::string_view description, Provider& provider, const EncodeOptions& options = {});

/// Replaces every occurrence of `secret` with "***".
std::string redact(std::string text, const std::string& secret);

}  // namespace scenecode::llm
