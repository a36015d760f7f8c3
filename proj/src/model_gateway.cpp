#include "skillcraft/model_gateway.hpp"

#include <algorithm>
#include <fstream>
#include <thread>

namespace skillcraft {

using nlohmann::json;

std::string_view to_string(ReasoningEffort e) noexcept {
  switch (e) {
    case ReasoningEffort::Low: return "low";
    case ReasoningEffort::Medium: return "medium";
    case ReasoningEffort::High: return "high";
  }
  return "medium";
}

std::string ChatRequest::all_text() const {
  std::string out = system;
  for (const auto& m : messages) {
    out += '\n';
    out += m.content;
  }
  return out;
}

namespace {

bool matches_type(const json& v, const std::string& type) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "integer") return v.is_number_integer() || v.is_number_unsigned();
  if (type == "number") return v.is_number();
  if (type == "boolean") return v.is_boolean();
  if (type == "null") return v.is_null();
  return true;
}

}  // namespace

std::optional<std::string> validate_against_schema(const json& value, const json& schema,
                                                   const std::string& path) {
  if (!schema.is_object()) return std::nullopt;

  if (auto it = schema.find("type"); it != schema.end()) {
    bool ok = false;
    if (it->is_string()) {
      ok = matches_type(value, it->get<std::string>());
    } else if (it->is_array()) {
      ok = std::any_of(it->begin(), it->end(),
                       [&](const json& t) { return t.is_string() && matches_type(value, t.get<std::string>()); });
    }
    if (!ok) return path + ": expected type " + it->dump() + ", got " + value.type_name();
  }

  if (auto it = schema.find("enum"); it != schema.end() && it->is_array()) {
    if (std::find(it->begin(), it->end(), value) == it->end())
      return path + ": value " + value.dump() + " not in " + it->dump();
  }

  if (value.is_object()) {
    const json props = schema.value("properties", json::object());
    if (auto req = schema.find("required"); req != schema.end() && req->is_array()) {
      for (const auto& key : *req) {
        if (key.is_string() && !value.contains(key.get<std::string>()))
          return path + ": missing required property '" + key.get<std::string>() + "'";
      }
    }
    const bool closed = schema.contains("additionalProperties") &&
                        schema["additionalProperties"].is_boolean() &&
                        !schema["additionalProperties"].get<bool>();
    for (const auto& [key, v] : value.items()) {
      if (auto p = props.find(key); p != props.end()) {
        if (auto err = validate_against_schema(v, *p, path + "." + key)) return err;
      } else if (closed) {
        return path + ": unexpected property '" + key + "'";
      }
    }
  }

  if (value.is_array()) {
    if (auto items = schema.find("items"); items != schema.end()) {
      for (std::size_t i = 0; i < value.size(); ++i) {
        if (auto err = validate_against_schema(value[i], *items, path + "[" + std::to_string(i) + "]"))
          return err;
      }
    }
  }
  return std::nullopt;
}

ChatResponse complete(Provider& provider, const ChatRequest& request, const RetryPolicy& policy,
                      const Sleeper& sleeper) {
  if (request.system.empty() && request.messages.empty())
    throw Error(ErrorKind::InvalidArgument, "chat request needs a system prompt or a message");
  if (policy.max_attempts == 0)
    throw Error(ErrorKind::InvalidArgument, "retry policy needs at least one attempt");

  std::string last_failure;
  for (std::size_t attempt = 1; attempt <= policy.max_attempts; ++attempt) {
    ChatResponse response;
    try {
      response = provider.send(request);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::RateLimited && e.kind() != ErrorKind::Transport) throw;
      last_failure = e.what();
      if (attempt < policy.max_attempts && !policy.backoff.empty()) {
        const auto delay = policy.backoff[std::min(attempt - 1, policy.backoff.size() - 1)];
        if (sleeper) {
          sleeper(delay);
        } else {
          std::this_thread::sleep_for(delay);
        }
      }
      continue;
    }

    if (!response.text && response.tool_calls.empty())
      throw Error(ErrorKind::MalformedResponse, "response carries neither text nor tool calls");

    for (auto& call : response.tool_calls) {
      auto decl = std::find_if(request.tools.begin(), request.tools.end(),
                               [&](const ToolDecl& d) { return d.name == call.name; });
      if (decl == request.tools.end()) {
        call.schema_error = "unknown tool '" + call.name + "'";
      } else if (!call.schema_error) {
        call.schema_error = validate_against_schema(call.arguments, decl->parameters);
      }
    }
    return response;
  }
  throw Error(ErrorKind::Exhausted,
              "gave up after " + std::to_string(policy.max_attempts) + " attempts: " + last_failure);
}

Gateway::Gateway(std::shared_ptr<Provider> provider, RetryPolicy policy, Sleeper sleeper)
    : provider_(std::move(provider)), policy_(std::move(policy)), sleeper_(std::move(sleeper)) {
  if (!provider_) throw Error(ErrorKind::InvalidArgument, "gateway needs a provider");
}

ChatResponse Gateway::complete(const ChatRequest& request) const {
  return skillcraft::complete(*provider_, request, policy_, sleeper_);
}

ScriptEntry ScriptEntry::reply(std::string text) {
  ScriptEntry e;
  e.response = ChatResponse{std::move(text), {}, "stop"};
  return e;
}

ScriptEntry ScriptEntry::tools(std::vector<ToolCall> calls, std::optional<std::string> text) {
  for (std::size_t i = 0; i < calls.size(); ++i)
    if (calls[i].id.empty()) calls[i].id = "call_" + std::to_string(i);
  ScriptEntry e;
  e.response = ChatResponse{std::move(text), std::move(calls), "tool_calls"};
  return e;
}

ScriptEntry ScriptEntry::fail(ErrorKind kind, std::string message) {
  ScriptEntry e;
  e.failure = kind;
  e.failure_message = std::move(message);
  return e;
}

ScriptEntry& ScriptEntry::when(std::string needle) & {
  match = std::move(needle);
  return *this;
}

ScriptEntry&& ScriptEntry::when(std::string needle) && {
  match = std::move(needle);
  return std::move(*this);
}

ScriptedProvider::ScriptedProvider(std::vector<ScriptEntry> script)
    : script_(std::move(script)), used_(script_.size(), false) {}

ChatResponse ScriptedProvider::send(const ChatRequest& request) {
  std::lock_guard lock(mu_);
  recorded_.push_back(request);
  if (!record_path_.empty()) {
    std::ofstream log(record_path_, std::ios::app);
    if (!log) throw Error(ErrorKind::Io, "cannot append to '" + record_path_.string() + "'");
    log << to_chat_completions_json(request).dump() << "\n";
  }
  const std::string text = request.all_text();
  std::optional<std::size_t> pick;
  for (std::size_t i = 0; i < script_.size() && !pick; ++i)
    if (!used_[i] && script_[i].match && text.find(*script_[i].match) != std::string::npos) pick = i;
  for (std::size_t i = 0; i < script_.size() && !pick; ++i)
    if (!used_[i] && !script_[i].match) pick = i;
  if (pick) {
    used_[*pick] = true;
    const auto& entry = script_[*pick];
    if (entry.failure) throw Error(*entry.failure, entry.failure_message);
    return *entry.response;
  }
  throw Error(ErrorKind::ScriptExhausted,
              "script exhausted after " + std::to_string(script_.size()) + " entries (call " +
                  std::to_string(recorded_.size()) + ")");
}

void ScriptedProvider::record_to(std::filesystem::path path) {
  std::lock_guard lock(mu_);
  record_path_ = std::move(path);
}

std::vector<ChatRequest> ScriptedProvider::recorded() const {
  std::lock_guard lock(mu_);
  return recorded_;
}

std::size_t ScriptedProvider::calls() const {
  std::lock_guard lock(mu_);
  return recorded_.size();
}

std::size_t ScriptedProvider::remaining() const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(std::count(used_.begin(), used_.end(), false));
}

ChatResponse CallbackProvider::send(const ChatRequest& request) {
  std::lock_guard lock(mu_);
  ++calls_;
  return fn_(request);
}

std::size_t CallbackProvider::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::vector<ScriptEntry> script_from_json(const json& j) {
  if (!j.is_array()) throw Error(ErrorKind::Parse, "script must be a JSON array");
  std::vector<ScriptEntry> out;
  for (const auto& item : j) {
    if (!item.is_object()) throw Error(ErrorKind::Parse, "script entry must be an object");
    ScriptEntry e;
    if (item.contains("error")) {
      const auto kind = item.at("error").get<std::string>();
      ErrorKind k;
      if (kind == "rate_limited") k = ErrorKind::RateLimited;
      else if (kind == "transport") k = ErrorKind::Transport;
      else if (kind == "auth") k = ErrorKind::AuthError;
      else if (kind == "malformed") k = ErrorKind::MalformedResponse;
      else throw Error(ErrorKind::Parse, "unknown scripted error '" + kind + "'");
      e = ScriptEntry::fail(k, item.value("message", "scripted failure"));
    } else {
      ChatResponse r;
      if (item.contains("text") && !item.at("text").is_null()) r.text = item.at("text").get<std::string>();
      if (item.contains("tool_calls")) {
        std::size_t idx = 0;
        for (const auto& c : item.at("tool_calls")) {
          ToolCall call;
          call.id = c.value("id", "call_" + std::to_string(idx++));
          call.name = c.at("name").get<std::string>();
          call.arguments = c.value("arguments", json::object());
          r.tool_calls.push_back(std::move(call));
        }
      }
      r.finish_reason = item.value("finish_reason", r.tool_calls.empty() ? "stop" : "tool_calls");
      e.response = std::move(r);
    }
    if (item.contains("match")) e.match = item.at("match").get<std::string>();
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<ScriptEntry> load_script_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open script file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, "script file '" + path + "': " + e.what());
  }
  return script_from_json(j);
}

}  // namespace skillcraft
