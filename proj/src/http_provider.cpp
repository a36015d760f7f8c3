// OpenAI-compatible chat-completions transport. The vendor wire format is
// confined to this file.

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>

#include "skillcraft/model_gateway.hpp"

namespace skillcraft {

using nlohmann::json;

json to_chat_completions_json(const ChatRequest& request) {
  json messages = json::array();
  if (!request.system.empty()) messages.push_back({{"role", "system"}, {"content", request.system}});
  for (const auto& m : request.messages) {
    json msg = {{"role", m.role}, {"content", m.content}};
    if (!m.tool_calls.empty()) {
      json calls = json::array();
      for (const auto& c : m.tool_calls) {
        calls.push_back({{"id", c.id},
                         {"type", "function"},
                         {"function", {{"name", c.name}, {"arguments", c.arguments.dump()}}}});
      }
      msg["tool_calls"] = std::move(calls);
      if (m.content.empty()) msg["content"] = nullptr;
    }
    if (m.role == "tool") msg["tool_call_id"] = m.tool_call_id;
    messages.push_back(std::move(msg));
  }

  json body = {{"model", request.model},
               {"messages", std::move(messages)},
               {"temperature", request.temperature},
               {"reasoning_effort", std::string(to_string(request.reasoning_effort))}};
  if (!request.tools.empty()) {
    json tools = json::array();
    for (const auto& t : request.tools) {
      tools.push_back({{"type", "function"},
                       {"function",
                        {{"name", t.name}, {"description", t.description}, {"parameters", t.parameters}}}});
    }
    body["tools"] = std::move(tools);
  }
  return body;
}

ChatResponse from_chat_completions_json(const json& body) {
  try {
    const auto& choice = body.at("choices").at(0);
    const auto& message = choice.at("message");
    ChatResponse r;
    if (message.contains("content") && message.at("content").is_string())
      r.text = message.at("content").get<std::string>();
    if (message.contains("tool_calls") && message.at("tool_calls").is_array()) {
      for (const auto& c : message.at("tool_calls")) {
        ToolCall call;
        call.id = c.value("id", "");
        call.name = c.at("function").at("name").get<std::string>();
        const auto& args = c.at("function").at("arguments");
        if (args.is_string()) {
          try {
            call.arguments = json::parse(args.get<std::string>());
          } catch (const json::exception& e) {
            call.arguments = args;
            call.schema_error = std::string("arguments are not valid JSON: ") + e.what();
          }
        } else {
          call.arguments = args;
        }
        r.tool_calls.push_back(std::move(call));
      }
    }
    r.finish_reason = choice.value("finish_reason", "stop");
    if (!r.text && r.tool_calls.empty())
      throw Error(ErrorKind::MalformedResponse, "choice has neither content nor tool calls");
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MalformedResponse, std::string("unexpected response shape: ") + e.what(),
                body.dump());
  }
}

std::optional<ErrorKind> classify_http_status(int status) noexcept {
  if (status >= 200 && status < 300) return std::nullopt;
  if (status == 401 || status == 403) return ErrorKind::AuthError;
  if (status == 429) return ErrorKind::RateLimited;
  if (status == 408 || status >= 500) return ErrorKind::Transport;
  return ErrorKind::MalformedResponse;
}

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw Error(ErrorKind::Config, "endpoint '" + url + "' lacks a scheme");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

class HttpProvider : public Provider {
 public:
  explicit HttpProvider(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)), url_(split_url(endpoint_.url)) {}

  ChatResponse send(const ChatRequest& request) override {
    const char* key = std::getenv(endpoint_.credential_env.c_str());
    if (!key || !*key)
      throw Error(ErrorKind::AuthError,
                  "credential variable '" + endpoint_.credential_env + "' is not set");

    httplib::Client client(url_.origin);
    client.set_connection_timeout(30);
    client.set_read_timeout(static_cast<time_t>(endpoint_.timeout.count()));
    httplib::Headers headers;
    if (endpoint_.auth_header == "Authorization") {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    } else {
      headers.emplace(endpoint_.auth_header, key);
    }

    auto res = client.Post(url_.path, headers, to_chat_completions_json(request).dump(),
                           "application/json");
    if (!res) throw Error(ErrorKind::Transport, "HTTP transport failure: " + httplib::to_string(res.error()));
    if (auto kind = classify_http_status(res->status))
      throw Error(*kind, "HTTP " + std::to_string(res->status) + " from " + endpoint_.url, res->body);

    json body;
    try {
      body = json::parse(res->body);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::MalformedResponse, std::string("response is not JSON: ") + e.what(), res->body);
    }
    return from_chat_completions_json(body);
  }

 private:
  HttpEndpoint endpoint_;
  SplitUrl url_;
};

}  // namespace

std::shared_ptr<Provider> make_http_provider(HttpEndpoint endpoint) {
  return std::make_shared<HttpProvider>(std::move(endpoint));
}

}  // namespace skillcraft
