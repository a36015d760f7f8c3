#include "skillcraft/extraction.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <tuple>

#include "skillcraft/error.hpp"
#include "skillcraft/model_output.hpp"
#include "skillcraft/parallel.hpp"
#include "skillcraft/structured_reply.hpp"

namespace skillcraft {

using nlohmann::json;

std::string_view to_string(PatternKind k) noexcept {
  return k == PatternKind::Success ? "success" : "failure";
}

std::size_t PatternSet::count(PatternKind k) const noexcept {
  return static_cast<std::size_t>(
      std::count_if(patterns.begin(), patterns.end(), [k](const Pattern& p) { return p.kind == k; }));
}

namespace {

json pattern_list(const PatternSet& set, PatternKind kind) {
  json arr = json::array();
  for (const auto& p : set.patterns)
    if (p.kind == kind) arr.push_back({{"pattern", p.title}, {"description", p.description}});
  return arr;
}

}  // namespace

json to_json(const PatternSet& set) {
  return json{{"success_patterns", pattern_list(set, PatternKind::Success)},
              {"failure_patterns", pattern_list(set, PatternKind::Failure)},
              {"summary", set.summary},
              {"source", set.source}};
}

void ExtractionConfig::check() const {
  if (max_patterns < 1) throw Error(ErrorKind::InvalidArgument, "K (max patterns) must be >= 1");
  if (group_size < 2) throw Error(ErrorKind::InvalidArgument, "G (merge group size) must be >= 2");
  if (synthesis_turn_cap < 1) throw Error(ErrorKind::InvalidArgument, "synthesis turn cap must be >= 1");
  budget.check();
}

std::size_t MergeTrace::total_calls() const noexcept {
  std::size_t total = 0;
  for (auto c : merge_calls) total += c;
  return total;
}

namespace {

ChatRequest base_request(const ExtractionConfig& cfg, std::string system) {
  ChatRequest req;
  req.system = std::move(system);
  req.model = cfg.extractor_model;
  req.temperature = cfg.temperature;
  req.reasoning_effort = cfg.reasoning_effort;
  return req;
}

std::string entry_text(const json& entry, std::initializer_list<const char*> keys) {
  for (const char* key : keys) {
    if (entry.contains(key) && entry.at(key).is_string()) {
      auto s = trim(entry.at(key).get<std::string>());
      if (!s.empty()) return s;
    }
  }
  return {};
}

Pattern parse_pattern(const json& entry, PatternKind kind) {
  if (!entry.is_object()) throw ReplyParseError("pattern entry is not an object: " + entry.dump());
  Pattern p{kind, entry_text(entry, {"pattern", "title", "name"}), entry_text(entry, {"description"})};
  if (p.title.empty()) throw ReplyParseError("pattern entry lacks a non-empty 'pattern' name");
  if (p.description.empty()) throw ReplyParseError("pattern '" + p.title + "' lacks a description");
  return p;
}

std::optional<PatternKind> parse_kind(const json& entry) {
  if (!entry.is_object() || !entry.contains("type") || !entry.at("type").is_string()) return std::nullopt;
  auto t = entry.at("type").get<std::string>();
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t.find("success") != std::string::npos) return PatternKind::Success;
  if (t.find("fail") != std::string::npos) return PatternKind::Failure;
  return std::nullopt;
}

}  // namespace

PatternSet analyze_trajectory(const Trajectory& trajectory, const ExtractionConfig& cfg,
                              const Gateway& gateway) {
  const auto kind = trajectory.outcome ? PatternKind::Success : PatternKind::Failure;
  auto req = base_request(cfg, prompts::analysis_system(trajectory.outcome ? prompts::Polarity::Success
                                                                           : prompts::Polarity::Failure,
                                                        cfg.max_patterns, cfg.guidance));
  req.messages.push_back({"user", render_trajectory(trajectory, cfg.render_char_cap), {}, {}});

  return ask_structured(gateway, std::move(req), [&](const std::string& text) {
    auto doc = extract_json(text);
    if (!doc.ok()) throw ReplyParseError(doc.error);
    PatternSet set;
    set.source = {trajectory.id};
    const json* list = nullptr;
    if (doc.value.is_array()) {
      list = &doc.value;
    } else if (doc.value.is_object()) {
      for (const char* key : {"patterns", "entries", "items"}) {
        if (doc.value.contains(key) && doc.value.at(key).is_array()) {
          list = &doc.value.at(key);
          break;
        }
      }
      if (doc.value.contains("summary") && doc.value.at("summary").is_string())
        set.summary = doc.value.at("summary").get<std::string>();
    }
    if (!list) throw ReplyParseError("expected a JSON list of {type, pattern, description} entries");
    // Only the requested polarity was asked for; the reply's type field is not trusted.
    for (const auto& entry : *list) {
      if (set.patterns.size() == cfg.max_patterns) break;
      set.patterns.push_back(parse_pattern(entry, kind));
    }
    return set;
  });
}

namespace {

void collect(const json& arr, PatternKind kind, std::vector<Pattern>& out) {
  if (!arr.is_array()) throw ReplyParseError("pattern list is not an array");
  for (const auto& e : arr) out.push_back(parse_pattern(e, kind));
}

PatternSet parse_merge_reply(const std::string& text, const std::vector<PatternSet>& group) {
  auto doc = extract_json(text);
  if (!doc.ok()) throw ReplyParseError(doc.error);
  if (!doc.value.is_object())
    throw ReplyParseError("expected a JSON object with success_patterns and failure_patterns");
  const json& v = doc.value;

  PatternSet merged;
  bool found = false;
  for (const char* key : {"success_patterns", "success"}) {
    if (v.contains(key)) {
      collect(v.at(key), PatternKind::Success, merged.patterns);
      found = true;
      break;
    }
  }
  for (const char* key : {"failure_patterns", "failure"}) {
    if (v.contains(key)) {
      collect(v.at(key), PatternKind::Failure, merged.patterns);
      found = true;
      break;
    }
  }
  if (!found && v.contains("patterns") && v.at("patterns").is_array()) {
    found = true;
    for (const auto& e : v.at("patterns")) {
      auto kind = parse_kind(e);
      if (!kind) throw ReplyParseError("merged pattern lacks a success/failure type: " + e.dump());
      merged.patterns.push_back(parse_pattern(e, *kind));
    }
  }
  if (!found) throw ReplyParseError("expected success_patterns and failure_patterns lists");
  if (v.contains("summary") && v.at("summary").is_string()) merged.summary = v.at("summary").get<std::string>();

  for (auto kind : {PatternKind::Success, PatternKind::Failure}) {
    const bool in_input = std::any_of(group.begin(), group.end(),
                                      [kind](const PatternSet& s) { return s.count(kind) > 0; });
    if (merged.count(kind) > 0 && !in_input)
      throw ReplyParseError(std::string("merged output contains ") + std::string(to_string(kind)) +
                            " patterns but no input set had any; do NOT convert between types");
  }

  for (const auto& s : group) merged.source.insert(merged.source.end(), s.source.begin(), s.source.end());
  return merged;
}

}  // namespace

PatternSet merge_pattern_sets(const std::vector<PatternSet>& group, const ExtractionConfig& cfg,
                              const Gateway& gateway) {
  auto req = base_request(cfg, prompts::merge_system());
  std::string user = "Pattern sets to merge (" + std::to_string(group.size()) + "):\n";
  for (std::size_t i = 0; i < group.size(); ++i) {
    json doc = to_json(group[i]);
    doc["set"] = i + 1;
    user += "\n" + doc.dump(2) + "\n";
  }
  req.messages.push_back({"user", std::move(user), {}, {}});
  return ask_structured(gateway, std::move(req),
                        [&](const std::string& text) { return parse_merge_reply(text, group); });
}

ConsolidationResult consolidate(const std::vector<PatternSet>& sets, const ExtractionConfig& cfg,
                                const Gateway& gateway) {
  if (sets.empty()) throw Error(ErrorKind::EmptyInput, "consolidate: no pattern sets");
  cfg.check();

  ConsolidationResult result;
  std::vector<PatternSet> level = sets;
  result.trace.level_sizes.push_back(level.size());

  while (level.size() > 1) {
    const std::size_t G = cfg.group_size;
    const std::size_t groups = (level.size() + G - 1) / G;
    std::vector<PatternSet> next(groups);
    std::vector<std::size_t> to_merge;
    for (std::size_t j = 0; j < groups; ++j) {
      const std::size_t begin = j * G;
      const std::size_t end = std::min(level.size(), begin + G);
      if (end - begin == 1) {
        next[j] = level[begin];
      } else {
        to_merge.push_back(j);
      }
    }
    parallel_for(to_merge.size(), cfg.concurrency, [&](std::size_t k) {
      const std::size_t j = to_merge[k];
      const std::size_t begin = j * G;
      const std::size_t end = std::min(level.size(), begin + G);
      std::vector<PatternSet> group(level.begin() + static_cast<std::ptrdiff_t>(begin),
                                    level.begin() + static_cast<std::ptrdiff_t>(end));
      next[j] = merge_pattern_sets(group, cfg, gateway);
    });
    result.trace.merge_calls.push_back(to_merge.size());
    level = std::move(next);
    result.trace.level_sizes.push_back(level.size());
  }
  result.merged = std::move(level.front());
  return result;
}

std::vector<ToolDecl> synthesis_tools() {
  const json files = {{"type", "object"}, {"description", "filename -> text content"}};
  const json skill_props = {
      {"name", {{"type", "string"}, {"description", "lowercase-hyphen slug, at most 64 characters"}}},
      {"description", {{"type", "string"}, {"description", "1-2 sentences: what class of problems, when to apply"}}},
      {"body", {{"type", "string"}, {"description", "Markdown: strategies, pitfalls, decision criteria, verification"}}},
      {"references", files},
      {"scripts", files}};
  const json skill_schema = {{"type", "object"},
                             {"properties", skill_props},
                             {"required", {"name", "description", "body"}},
                             {"additionalProperties", false}};
  json update_props = skill_props;
  update_props["new_name"] = {{"type", "string"}, {"description", "optional rename"}};
  return {
      {"create_skill", "Create a new skill in the skill store.", skill_schema},
      {"update_skill", "Replace an existing skill (identified by name) with new content.",
       {{"type", "object"},
        {"properties", update_props},
        {"required", {"name", "description", "body"}},
        {"additionalProperties", false}}},
      {"delete_skill", "Delete a skill from the skill store.",
       {{"type", "object"},
        {"properties", {{"name", {{"type", "string"}}}}},
        {"required", {"name"}},
        {"additionalProperties", false}}},
      {"finish", "Signal that all skills have been submitted.",
       {{"type", "object"}, {"properties", json::object()}, {"additionalProperties", false}}},
  };
}

namespace {

Skill skill_from_arguments(const json& args) {
  Skill s;
  s.name = args.at("name").get<std::string>();
  s.description = args.at("description").get<std::string>();
  s.body = args.at("body").get<std::string>();
  for (const char* key : {"references", "scripts"}) {
    if (!args.contains(key) || args.at(key).is_null()) continue;
    auto& target = std::string_view(key) == "references" ? s.references : s.scripts;
    for (const auto& [file, content] : args.at(key).items()) {
      if (!content.is_string())
        throw Error(ErrorKind::SchemaViolation,
                    std::string("schema violation: ") + key + " entry '" + file + "' must be a string");
      target.emplace(file, content.get<std::string>());
    }
  }
  return s;
}

std::string describe(const SkillStore& store, const Skill& s) {
  return "'" + s.name + "' (" + std::to_string(char_count(s.body)) + "/" +
         std::to_string(store.budget().max_skill_chars) + " body characters; store holds " +
         std::to_string(store.size()) + "/" + std::to_string(store.budget().max_skills) + " skills)";
}

}  // namespace

SynthesisResult synthesize_skills(const PatternSet& consolidated, const ExtractionConfig& cfg,
                                  const Gateway& gateway) {
  cfg.check();
  SynthesisResult result{SkillStore(cfg.budget), 0, {}};
  SkillStore& store = result.store;

  auto req = base_request(cfg, prompts::synthesis_system(cfg.budget, cfg.guidance));
  req.tools = synthesis_tools();
  req.messages.push_back({"user", "Consolidated pattern set:\n" + to_json(consolidated).dump(2), {}, {}});

  bool finished = false;
  while (!finished && result.turns < cfg.synthesis_turn_cap) {
    ++result.turns;
    const ChatResponse response = gateway.complete(req);

    if (response.tool_calls.empty()) {
      req.messages.push_back({"assistant", response.text.value_or(""), {}, {}});
      req.messages.push_back({"user",
                              "Plain text in the response is ignored. Submit skills with the "
                              "create_skill tool and call finish when done.",
                              {},
                              {}});
      result.tool_log.push_back("(text): ignored");
      continue;
    }

    req.messages.push_back({"assistant", response.text.value_or(""), response.tool_calls, {}});
    for (const auto& call : response.tool_calls) {
      std::string reply;
      if (call.schema_error) {
        reply = "Error (SchemaViolation): " + *call.schema_error + ". Fix the arguments and retry.";
      } else {
        try {
          if (call.name == "create_skill") {
            const Skill s = skill_from_arguments(call.arguments);
            store.create(s);
            reply = "ok: created skill " + describe(store, s);
          } else if (call.name == "update_skill") {
            Skill s = skill_from_arguments(call.arguments);
            const std::string target = s.name;
            if (call.arguments.contains("new_name")) s.name = call.arguments.at("new_name").get<std::string>();
            store.update(target, s);
            reply = "ok: updated skill " + describe(store, s);
          } else if (call.name == "delete_skill") {
            const auto name = call.arguments.at("name").get<std::string>();
            store.remove(name);
            reply = "ok: deleted skill '" + name + "'";
          } else if (call.name == "finish") {
            if (store.empty()) {
              reply = "Error: no skills have been created. Create at least one skill with create_skill "
                      "before calling finish.";
            } else {
              reply = "ok: finished with " + std::to_string(store.size()) + " skill(s)";
              finished = true;
            }
          }
        } catch (const Error& e) {
          reply = "Error (" + std::string(to_string(e.kind())) + "): " + e.what();
        }
      }
      result.tool_log.push_back(call.name + ": " + reply);
      req.messages.push_back({"tool", reply, {}, call.id});
      if (finished) break;
    }
  }

  if (store.empty())
    throw Error(ErrorKind::SynthesisStalled,
                "synthesis produced no valid skill within " + std::to_string(cfg.synthesis_turn_cap) +
                    " turns");
  store.seal();
  return result;
}

ExtractionResult extract(const ExperiencePool& pool, const ExtractionConfig& cfg, const Gateway& gateway) {
  if (pool.empty()) throw Error(ErrorKind::EmptyInput, "extract: experience pool is empty");
  cfg.check();

  ExtractionResult result{SkillStore(cfg.budget), {}, {}, {}, 0, 0};
  const auto& trajectories = pool.trajectories();
  result.per_trajectory.resize(trajectories.size());
  parallel_for(trajectories.size(), cfg.concurrency, [&](std::size_t i) {
    result.per_trajectory[i] = analyze_trajectory(trajectories[i], cfg, gateway);
  });
  result.analysis_calls = trajectories.size();

  auto consolidated = consolidate(result.per_trajectory, cfg, gateway);
  result.consolidated = std::move(consolidated.merged);
  result.merge = std::move(consolidated.trace);

  auto synthesis = synthesize_skills(result.consolidated, cfg, gateway);
  result.store = std::move(synthesis.store);
  result.synthesis_turns = synthesis.turns;
  return result;
}

Skill rewrite_format(const Skill& skill, prompts::BodyFormat format, const Gateway& gateway,
                     const RewriteOptions& options) {
  if (!validate_skill(skill, options.budget).ok())
    throw Error(ErrorKind::InvalidArgument, "rewrite_format: input skill is not valid");

  std::string last_reason = "no attempt made";
  for (int attempt = 0; attempt < 2; ++attempt) {
    ChatRequest rewrite;
    rewrite.model = options.model;
    rewrite.temperature = options.temperature;
    rewrite.messages.push_back({"user", prompts::format_rewrite(skill, format), {}, {}});
    const auto reply = gateway.complete(rewrite);

    Skill candidate = skill;
    candidate.body = strip_fence(reply.text.value_or(""));
    if (candidate.body.empty()) {
      last_reason = "rewrite was empty";
      continue;
    }

    ChatRequest verify;
    verify.model = options.model;
    verify.temperature = options.temperature;
    verify.messages.push_back({"user", prompts::format_verification(skill, candidate.body, format), {}, {}});
    bool approved = false;
    try {
      std::tie(approved, last_reason) =
          ask_structured(gateway, verify, [](const std::string& text) -> std::pair<bool, std::string> {
            auto doc = extract_json(text);
            if (!doc.ok() || !doc.value.is_object() || !doc.value.contains("approved") ||
                !doc.value.at("approved").is_boolean())
              throw ReplyParseError("expected {\"approved\": true|false, \"reason\": \"...\"}");
            return {doc.value.at("approved").get<bool>(), doc.value.value("reason", std::string())};
          });
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::MalformedModelOutput) throw;
      last_reason = e.what();
    }
    if (!approved) continue;

    const auto verdict = validate_skill(candidate, options.budget);
    if (!verdict.ok()) {
      last_reason = "rewritten skill is invalid: " + verdict.summary();
      continue;
    }
    return candidate;
  }
  throw Error(ErrorKind::FormatRewriteFailed,
              "rewrite to " + std::string(prompts::format_name(format)) + " rejected twice: " + last_reason);
}

}  // namespace skillcraft
