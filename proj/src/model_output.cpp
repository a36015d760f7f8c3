#include "skillcraft/model_output.hpp"

#include <optional>

namespace skillcraft {

using nlohmann::json;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::string strip_fence(std::string_view text) {
  std::string t = trim(text);
  if (t.rfind("```", 0) != 0) return t;
  const auto first_newline = t.find('\n');
  if (first_newline == std::string::npos) return t;
  const auto closing = t.rfind("```");
  if (closing == std::string::npos || closing <= first_newline) return t;
  return trim(std::string_view(t).substr(first_newline + 1, closing - first_newline - 1));
}

namespace {

std::optional<json> try_parse(std::string_view s, std::string& error) {
  try {
    return json::parse(s);
  } catch (const json::exception& e) {
    error = e.what();
    return std::nullopt;
  }
}

// End offset (exclusive) of the balanced bracket span starting at `open`.
std::optional<std::size_t> balanced_end(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_string = false, escaped = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{' || c == '[') ++depth;
    else if (c == '}' || c == ']') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::nullopt;
}

}  // namespace

JsonExtraction extract_json(std::string_view text) {
  std::string error;
  const std::string body = strip_fence(text);
  if (auto v = try_parse(body, error)) return {*v, {}};

  // A fenced block somewhere inside prose.
  if (auto fence = text.find("```"); fence != std::string_view::npos) {
    const auto line_end = text.find('\n', fence);
    const auto close = line_end == std::string_view::npos ? line_end : text.find("```", line_end);
    if (close != std::string_view::npos) {
      std::string inner_error;
      if (auto v = try_parse(text.substr(line_end + 1, close - line_end - 1), inner_error)) return {*v, {}};
    }
  }

  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '{' && text[i] != '[') continue;
    if (auto end = balanced_end(text, i)) {
      std::string span_error;
      if (auto v = try_parse(text.substr(i, *end - i), span_error)) return {*v, {}};
    }
  }
  return {json(), error.empty() ? "no JSON document found" : error};
}

}  // namespace skillcraft
