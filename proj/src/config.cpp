#include "skillcraft/config.hpp"

#include <fstream>
#include <set>

#include "skillcraft/error.hpp"

namespace skillcraft {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw Error(ErrorKind::Config, where + " must be an object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) throw Error(ErrorKind::Config, "unknown key '" + key + "' in " + where);
}

template <typename T>
void read(const json& obj, const char* key, T& into, const std::string& where) {
  if (!obj.contains(key) || obj[key].is_null()) return;
  try {
    into = obj[key].get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::Config, std::string("bad value for '") + key + "' in " + where);
  }
}

ModelEntry parse_model(const std::string& id, const json& j, const std::filesystem::path& base_dir) {
  const std::string where = "models." + id;
  reject_unknown(j, {"provider", "endpoint", "credential_env", "auth_header", "timeout_s", "script", "record"},
                where);
  ModelEntry m;
  std::string provider = "openai";
  read(j, "provider", provider, where);
  if (provider == "openai") {
    m.provider = ProviderKind::OpenAiCompatible;
    read(j, "endpoint", m.endpoint.url, where);
    read(j, "credential_env", m.endpoint.credential_env, where);
    read(j, "auth_header", m.endpoint.auth_header, where);
    long timeout = 600;
    read(j, "timeout_s", timeout, where);
    m.endpoint.timeout = std::chrono::seconds(timeout);
    if (m.endpoint.url.empty() || m.endpoint.credential_env.empty())
      throw Error(ErrorKind::Config, where + " needs 'endpoint' and 'credential_env'");
  } else if (provider == "scripted") {
    m.provider = ProviderKind::Scripted;
    std::string script;
    read(j, "script", script, where);
    if (script.empty()) throw Error(ErrorKind::Config, where + " needs 'script'");
    m.script = base_dir / script;
    std::string record;
    read(j, "record", record, where);
    if (!record.empty()) m.record = base_dir / record;
  } else {
    throw Error(ErrorKind::Config, where + ": unknown provider '" + provider + "' (expected openai or scripted)");
  }
  return m;
}

ReasoningEffort parse_effort(const std::string& s) {
  if (s == "low") return ReasoningEffort::Low;
  if (s == "medium") return ReasoningEffort::Medium;
  if (s == "high") return ReasoningEffort::High;
  throw Error(ErrorKind::Config, "reasoning_effort must be low, medium or high");
}

}  // namespace

const ModelEntry& Config::model(const std::string& id) const {
  auto it = models.find(id);
  if (it == models.end()) throw Error(ErrorKind::Config, "undeclared model '" + id + "'");
  return it->second;
}

Gateway Config::gateway(const std::string& id) const {
  const ModelEntry& m = model(id);
  if (m.provider == ProviderKind::Scripted) {
    auto provider = std::make_shared<ScriptedProvider>(load_script_file(m.script.string()));
    if (!m.record.empty()) provider->record_to(m.record);
    return Gateway(provider, retry, [](std::chrono::milliseconds) {});
  }
  return Gateway(make_http_provider(m.endpoint), retry);
}

Config config_from_json(const json& j, const std::filesystem::path& base_dir) {
  reject_unknown(j, {"models", "extraction", "retry", "judge", "rubric", "domains", "seed"}, "config");
  Config c;

  if (!j.contains("models") || !j["models"].is_object() || j["models"].empty())
    throw Error(ErrorKind::Config, "config needs a non-empty 'models' table");
  for (const auto& [id, entry] : j["models"].items()) c.models.emplace(id, parse_model(id, entry, base_dir));

  if (j.contains("extraction")) {
    const json& e = j["extraction"];
    reject_unknown(e,
                   {"K", "G", "max_skills", "max_skill_chars", "max_total_chars", "concurrency",
                    "synthesis_turn_cap", "render_char_cap", "temperature", "reasoning_effort"},
                   "extraction");
    auto& x = c.extraction;
    read(e, "K", x.max_patterns, "extraction");
    read(e, "G", x.group_size, "extraction");
    read(e, "max_skills", x.budget.max_skills, "extraction");
    read(e, "max_skill_chars", x.budget.max_skill_chars, "extraction");
    if (e.contains("max_total_chars") && !e["max_total_chars"].is_null()) {
      std::size_t total = 0;
      read(e, "max_total_chars", total, "extraction");
      x.budget.max_total_chars = total;
    }
    read(e, "concurrency", x.concurrency, "extraction");
    read(e, "synthesis_turn_cap", x.synthesis_turn_cap, "extraction");
    read(e, "render_char_cap", x.render_char_cap, "extraction");
    read(e, "temperature", x.temperature, "extraction");
    std::string effort;
    read(e, "reasoning_effort", effort, "extraction");
    if (!effort.empty()) x.reasoning_effort = parse_effort(effort);
  }
  try {
    c.extraction.check();
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, std::string("extraction: ") + e.what());
  }

  if (j.contains("retry")) {
    const json& r = j["retry"];
    reject_unknown(r, {"max_attempts", "backoff_ms"}, "retry");
    read(r, "max_attempts", c.retry.max_attempts, "retry");
    if (r.contains("backoff_ms")) {
      std::vector<long> ms;
      read(r, "backoff_ms", ms, "retry");
      c.retry.backoff.clear();
      for (long v : ms) c.retry.backoff.emplace_back(v);
    }
    if (c.retry.max_attempts == 0) throw Error(ErrorKind::Config, "retry.max_attempts must be positive");
  }

  if (j.contains("judge")) {
    const json& g = j["judge"];
    reject_unknown(g, {"model", "votes", "concurrency", "temperature"}, "judge");
    read(g, "model", c.judge.model, "judge");
    read(g, "votes", c.judge.votes, "judge");
    read(g, "concurrency", c.judge.concurrency, "judge");
    read(g, "temperature", c.judge.temperature, "judge");
  }

  if (j.contains("rubric")) {
    const json& r = j["rubric"];
    reject_unknown(r, {"dimensions", "max_consolidation_rounds", "threshold"}, "rubric");
    read(r, "dimensions", c.rubric.dimensions, "rubric");
    read(r, "max_consolidation_rounds", c.rubric.max_consolidation_rounds, "rubric");
    read(r, "threshold", c.rubric.threshold, "rubric");
  }

  read(j, "domains", c.domains, "config");
  read(j, "seed", c.seed, "config");
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, "config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j, path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

}  // namespace skillcraft
