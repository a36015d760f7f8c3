#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "skillcraft/error.hpp"

namespace skillcraft {

enum class ReasoningEffort { Low, Medium, High };

std::string_view to_string(ReasoningEffort e) noexcept;

struct ToolDecl {
  std::string name;
  std::string description;
  nlohmann::json parameters;  // JSON-schema subset, see validate_against_schema
};

struct ToolCall {
  std::string id;
  std::string name;
  nlohmann::json arguments;
  /// Set by the gateway when the call does not match its declaration.
  std::optional<std::string> schema_error;
};

struct Message {
  std::string role;  // "user", "assistant" or "tool"
  std::string content;
  std::vector<ToolCall> tool_calls;  // assistant turns only
  std::string tool_call_id;          // tool turns only
};

struct ChatRequest {
  std::string system;
  std::vector<Message> messages;
  std::vector<ToolDecl> tools;
  double temperature = 1.0;
  ReasoningEffort reasoning_effort = ReasoningEffort::Medium;
  std::string model;

  /// Concatenation of the system prompt and every message body.
  std::string all_text() const;
};

struct ChatResponse {
  std::optional<std::string> text;
  std::vector<ToolCall> tool_calls;
  std::string finish_reason = "stop";
};

struct RetryPolicy {
  std::size_t max_attempts = 3;
  std::vector<std::chrono::milliseconds> backoff{std::chrono::milliseconds(500),
                                                 std::chrono::milliseconds(1000),
                                                 std::chrono::milliseconds(2000)};
};

/// Chat-completion backend. Implementations must tolerate concurrent send()
/// calls. Transient failures are reported as Error{RateLimited|Transport}.
class Provider {
 public:
  virtual ~Provider() = default;
  virtual ChatResponse send(const ChatRequest& request) = 0;
};

/// Checks a document against the JSON-schema subset used for tool parameters:
/// type, properties, required, additionalProperties (bool), items, enum.
/// Returns the first mismatch, or nullopt.
std::optional<std::string> validate_against_schema(const nlohmann::json& value,
                                                   const nlohmann::json& schema,
                                                   const std::string& path = "$");

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Sends a request with retries for RateLimited/Transport failures.
/// Other failures surface immediately; running out of attempts raises Exhausted.
/// Tool calls in the response are checked against request.tools.
ChatResponse complete(Provider& provider, const ChatRequest& request, const RetryPolicy& policy,
                      const Sleeper& sleeper = {});

/// A provider bound to a retry policy; the handle the pipeline stages use.
class Gateway {
 public:
  explicit Gateway(std::shared_ptr<Provider> provider, RetryPolicy policy = {},
                   Sleeper sleeper = {});

  ChatResponse complete(const ChatRequest& request) const;
  Provider& provider() const noexcept { return *provider_; }

 private:
  std::shared_ptr<Provider> provider_;
  RetryPolicy policy_;
  Sleeper sleeper_;
};

struct ScriptEntry {
  std::optional<ChatResponse> response;
  std::optional<ErrorKind> failure;
  std::string failure_message;
  /// When set, the entry is only served to a request whose text contains it.
  std::optional<std::string> match;

  static ScriptEntry reply(std::string text);
  static ScriptEntry tools(std::vector<ToolCall> calls, std::optional<std::string> text = {});
  static ScriptEntry fail(ErrorKind kind, std::string message = "scripted failure");
  ScriptEntry& when(std::string needle) &;
  ScriptEntry&& when(std::string needle) &&;
};

/// Deterministic offline provider. Serves the first unconsumed entry whose
/// match occurs in the request text; if none does, the first unconsumed entry
/// without a match. Records every request it receives.
class ScriptedProvider : public Provider {
 public:
  explicit ScriptedProvider(std::vector<ScriptEntry> script);

  ChatResponse send(const ChatRequest& request) override;

  std::vector<ChatRequest> recorded() const;
  std::size_t calls() const;
  std::size_t remaining() const;

  /// Also append every request, in chat-completions wire form, as one JSON
  /// line to `path`.
  void record_to(std::filesystem::path path);

 private:
  mutable std::mutex mu_;
  std::vector<ScriptEntry> script_;
  std::vector<bool> used_;
  std::vector<ChatRequest> recorded_;
  std::filesystem::path record_path_;
};

/// Provider backed by a function; used for oracle judges in tests.
class CallbackProvider : public Provider {
 public:
  using Fn = std::function<ChatResponse(const ChatRequest&)>;
  explicit CallbackProvider(Fn fn) : fn_(std::move(fn)) {}

  ChatResponse send(const ChatRequest& request) override;
  std::size_t calls() const;

 private:
  mutable std::mutex mu_;
  Fn fn_;
  std::size_t calls_ = 0;
};

/// Script file format: a JSON array of entries, each either
/// {"text": ..., "tool_calls": [{"name", "arguments"}], "finish_reason", "match"}
/// or {"error": "rate_limited"|"transport"|"auth"|"malformed", "message", "match"}.
std::vector<ScriptEntry> script_from_json(const nlohmann::json& j);
std::vector<ScriptEntry> load_script_file(const std::string& path);

/// OpenAI-compatible chat-completions endpoint (OpenAI, Azure, Gemini's
/// compatibility layer, vLLM).
struct HttpEndpoint {
  std::string url;             // full URL of the chat/completions resource
  std::string credential_env;  // environment variable holding the API key
  std::string auth_header = "Authorization";  // "api-key" for Azure
  std::chrono::seconds timeout{600};
};

nlohmann::json to_chat_completions_json(const ChatRequest& request);
ChatResponse from_chat_completions_json(const nlohmann::json& body);

/// Maps an HTTP status to the gateway error taxonomy; nullopt for 2xx.
std::optional<ErrorKind> classify_http_status(int status) noexcept;

std::shared_ptr<Provider> make_http_provider(HttpEndpoint endpoint);

}  // namespace skillcraft
