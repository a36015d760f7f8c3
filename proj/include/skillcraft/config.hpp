#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include <json.hpp>

#include "skillcraft/extraction.hpp"
#include "skillcraft/model_gateway.hpp"

namespace skillcraft {

enum class ProviderKind { OpenAiCompatible, Scripted };

struct ModelEntry {
  ProviderKind provider = ProviderKind::OpenAiCompatible;
  HttpEndpoint endpoint;              // OpenAiCompatible only
  std::filesystem::path script;       // Scripted only, resolved against the config directory
  std::filesystem::path record;       // Scripted only, optional request log (JSON Lines)
};

struct JudgeDefaults {
  std::string model;
  std::size_t votes = 9;
  std::size_t concurrency = 1;
  double temperature = 1.0;
};

struct RubricDefaults {
  std::size_t dimensions = 7;
  std::size_t max_consolidation_rounds = 3;
  double threshold = 0.64;
};

/// Experiment manifest. Every key is optional except `models`; see README
/// for the full tree.
struct Config {
  std::map<std::string, ModelEntry> models;
  ExtractionConfig extraction;  // extractor_model left empty
  RetryPolicy retry;
  JudgeDefaults judge;
  RubricDefaults rubric;
  std::map<std::string, std::string> domains;  // domain id → description
  std::uint64_t seed = 0;

  /// Throws Config ("undeclared model") for ids missing from `models`.
  const ModelEntry& model(const std::string& id) const;

  /// Builds a gateway for a declared model. Scripted providers never sleep
  /// between retries.
  Gateway gateway(const std::string& id) const;
};

/// Throws Error(Config) on unknown keys or ill-typed values.
Config config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
Config load_config(const std::filesystem::path& path);

}  // namespace skillcraft
