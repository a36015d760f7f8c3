#pragma once

// Builders shared by the unit and acceptance tests.

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include <unistd.h>

#include "skillcraft/cli.hpp"
#include "skillcraft/error.hpp"
#include "skillcraft/experience_pool.hpp"
#include "skillcraft/judgment.hpp"
#include "skillcraft/model_gateway.hpp"
#include "skillcraft/skill_store.hpp"

namespace testsupport {

using nlohmann::json;
using namespace skillcraft;

/// Kind of the skillcraft::Error thrown by fn, or nullopt when none is thrown.
template <typename Fn>
std::optional<ErrorKind> thrown_kind(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

inline Trajectory make_trajectory(const std::string& id, bool outcome, const std::string& domain = "alfworld",
                                  const std::string& target = "gpt-5.4") {
  Trajectory t;
  t.id = id;
  t.task = "task for " + id;
  t.steps = {{"look around", "look", "You see a table."}, {std::nullopt, "take apple", "You take the apple."}};
  t.outcome = outcome;
  t.reward = outcome ? 1.0 : 0.0;
  t.domain = domain;
  t.target_model = target;
  return t;
}

/// Successes first (s0, s1, ...), then failures (f0, f1, ...).
inline ExperiencePool make_pool(std::size_t successes, std::size_t failures) {
  std::vector<Trajectory> ts;
  for (std::size_t i = 0; i < successes; ++i) ts.push_back(make_trajectory("s" + std::to_string(i), true));
  for (std::size_t i = 0; i < failures; ++i) ts.push_back(make_trajectory("f" + std::to_string(i), false));
  return ExperiencePool(std::move(ts));
}

inline Skill make_skill(const std::string& name, std::size_t body_chars = 40) {
  return Skill{name, "Use when " + name + " applies.", std::string(body_chars, 'x'), {}, {}};
}

inline json analysis_reply(const Trajectory& t) {
  return json{{"patterns",
               {{{"type", t.outcome ? "success" : "failure"},
                 {"pattern", "pattern from " + t.id},
                 {"description", "Observed in " + t.id + ": check the receptacle before acting."}}}},
              {"summary", "analysis of " + t.id}};
}

/// A merged set; pass false for a kind the merged inputs did not contain.
inline json merge_reply(bool success = true, bool failure = true) {
  json out{{"success_patterns", json::array()}, {"failure_patterns", json::array()}, {"summary", "merged"}};
  if (success)
    out["success_patterns"].push_back({{"pattern", "merged success"}, {"description", "Scan receptacles in order."}});
  if (failure)
    out["failure_patterns"].push_back(
        {{"pattern", "merged failure"}, {"description", "Never repeat a failed action."}});
  return out;
}

/// Substring that appears in a merge request whose inputs include trajectory `id`.
inline std::string pattern_marker(const std::string& id) { return "\"pattern from " + id + "\""; }

struct MergeRoute {
  std::string match = "Pattern sets to merge";
  bool success = true;
  bool failure = true;
};

inline json skill_arguments(const std::string& name = "household-search") {
  return json{{"name", name},
              {"description", "Locate and manipulate household objects efficiently."},
              {"body", "1. Scan receptacles in a fixed order.\n2. Never repeat an action that just failed."}};
}

/// Routes every reply by a substring of the request so the script works
/// under any analysis or merge concurrency.
/// Specific routes must precede generic ones: the first matching entry wins.
inline json extraction_script(const ExperiencePool& pool, const std::vector<MergeRoute>& merges) {
  json script = json::array();
  for (const auto& t : pool.trajectories())
    script.push_back({{"text", analysis_reply(t).dump()}, {"match", "Task: " + t.task + "\n"}});
  for (const auto& m : merges)
    script.push_back({{"text", merge_reply(m.success, m.failure).dump()}, {"match", m.match}});
  script.push_back({{"tool_calls", {{{"name", "create_skill"}, {"arguments", skill_arguments()}}}},
                    {"match", "Consolidated pattern set"}});
  script.push_back({{"tool_calls", {{{"name", "finish"}, {"arguments", json::object()}}}},
                    {"match", "Consolidated pattern set"}});
  return script;
}

/// Pair `i` of a judging fixture: skills "hi-i" and "lo-i", with the higher
/// one placed as skill_a when `higher_first`.
inline SkillPair judge_pair(std::size_t i, double gap, bool higher_first = true) {
  const Skill hi{"hi-" + std::to_string(i), "Higher-utility skill " + std::to_string(i) + ".", "Do the right thing.", {}, {}};
  const Skill lo{"lo-" + std::to_string(i), "Lower-utility skill " + std::to_string(i) + ".", "Do something.", {}, {}};
  SkillPair p;
  p.id = "pair-" + std::to_string(i);
  p.target = "gpt-5.4";
  p.domain = "alfworld";
  p.skill_a = higher_first ? hi : lo;
  p.skill_b = higher_first ? lo : hi;
  p.delta_a = higher_first ? 1.0 + gap : 1.0;
  p.delta_b = higher_first ? 1.0 : 1.0 + gap;
  return p;
}

/// Name of the skill shown in slot 1 or 2 of a judge prompt.
inline std::string name_in_slot(const std::string& prompt, int slot) {
  const std::string marker = "Skill " + std::to_string(slot) + ":\n```\n# ";
  const auto at = prompt.find(marker);
  if (at == std::string::npos) return {};
  const auto start = at + marker.size();
  return prompt.substr(start, prompt.find('\n', start) - start);
}

inline std::string slot_of(const std::string& prompt, const std::string& name) {
  return name_in_slot(prompt, 1) == name ? "Skill 1" : "Skill 2";
}

/// Slot label ("Skill 1"/"Skill 2") holding the higher-utility ("hi-") skill.
inline std::string higher_slot(const std::string& prompt) {
  return name_in_slot(prompt, 1).starts_with("hi-") ? "Skill 1" : "Skill 2";
}

inline std::string lower_slot(const std::string& prompt) {
  return higher_slot(prompt) == "Skill 1" ? "Skill 2" : "Skill 1";
}

inline Gateway callback_gateway(std::function<std::string(const std::string& prompt)> reply) {
  auto provider = std::make_shared<CallbackProvider>([reply = std::move(reply)](const ChatRequest& req) {
    return ChatResponse{reply(req.messages.back().content), {}, "stop"};
  });
  return Gateway(provider, RetryPolicy{}, [](std::chrono::milliseconds) {});
}

inline std::string choice_reply(const std::string& slot) { return json{{"choice", slot}}.dump(); }

/// A scratch directory removed on destruction.
class Workspace {
 public:
  Workspace() {
    static int counter = 0;
    dir_ = std::filesystem::temp_directory_path() /
           ("skillcraft-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(dir_);
    std::filesystem::create_directories(dir_);
  }
  ~Workspace() { std::filesystem::remove_all(dir_); }
  Workspace(const Workspace&) = delete;
  Workspace& operator=(const Workspace&) = delete;

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream out(dir_ / name, std::ios::binary);
    out << text;
    return path(name);
  }

  std::string read(const std::string& name) const {
    std::ifstream in(dir_ / name, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  bool exists(const std::string& name) const { return std::filesystem::exists(dir_ / name); }

 private:
  std::filesystem::path dir_;
};

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

inline CliResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "skillcraft");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = skillcraft::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

/// Config declaring scripted models: each id maps to `<id>.script.json` and
/// logs its requests to `<id>.requests.jsonl`.
inline json scripted_config(const std::vector<std::string>& ids, json extra = json::object()) {
  json models = json::object();
  for (const auto& id : ids)
    models[id] = {{"provider", "scripted"}, {"script", id + ".script.json"}, {"record", id + ".requests.jsonl"}};
  extra["models"] = models;
  return extra;
}

inline std::string pool_jsonl(const ExperiencePool& pool) {
  std::ostringstream out;
  write_trajectories_jsonl(out, pool.trajectories());
  return out.str();
}

inline std::string pairs_jsonl(const std::vector<SkillPair>& pairs) {
  std::ostringstream out;
  write_pairs_jsonl(out, pairs);
  return out.str();
}

}  // namespace testsupport
