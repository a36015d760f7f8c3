#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

namespace skillcraft {

struct JsonExtraction {
  nlohmann::json value;
  std::string error;  // empty on success

  bool ok() const noexcept { return error.empty(); }
};

/// Finds the JSON document in a model reply. Accepts bare JSON, a fenced
/// ```json block, or the first balanced {...} / [...] span in prose.
JsonExtraction extract_json(std::string_view text);

/// Strips one surrounding ``` fence (with optional language tag) and trims.
std::string strip_fence(std::string_view text);

std::string trim(std::string_view s);

}  // namespace skillcraft
