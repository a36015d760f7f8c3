#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "skillcraft/experience_pool.hpp"
#include "skillcraft/model_gateway.hpp"
#include "skillcraft/prompts.hpp"
#include "skillcraft/skill_store.hpp"

namespace skillcraft {

enum class PatternKind { Success, Failure };

std::string_view to_string(PatternKind k) noexcept;

/// A reusable behavioural insight mined from experience.
struct Pattern {
  PatternKind kind;
  std::string title;
  std::string description;

  bool operator==(const Pattern&) const = default;
};

struct PatternSet {
  std::vector<Pattern> patterns;
  std::string summary;
  std::vector<std::string> source;  // trajectory ids covered

  bool operator==(const PatternSet&) const = default;
  std::size_t count(PatternKind k) const noexcept;
};

nlohmann::json to_json(const PatternSet& set);

struct ExtractionConfig {
  std::size_t max_patterns = 3;  // K, per trajectory
  std::size_t group_size = 10;   // G, merge fan-in
  SkillBudget budget;
  std::optional<std::string> guidance;
  std::string extractor_model;
  std::size_t concurrency = 8;
  std::size_t synthesis_turn_cap = 20;
  std::size_t render_char_cap = kDefaultRenderCharCap;
  double temperature = 1.0;
  ReasoningEffort reasoning_effort = ReasoningEffort::Medium;

  /// Throws InvalidArgument unless K >= 1, G >= 2 and the budget is valid.
  void check() const;
};

/// Per-trajectory pattern mining. At most K patterns, all of the
/// trajectory's polarity.
PatternSet analyze_trajectory(const Trajectory& trajectory, const ExtractionConfig& cfg,
                              const Gateway& gateway);

/// Merges G pattern sets into one. Throws MalformedModelOutput when the
/// reply cannot be parsed or converts between pattern kinds.
PatternSet merge_pattern_sets(const std::vector<PatternSet>& group, const ExtractionConfig& cfg,
                              const Gateway& gateway);

struct MergeTrace {
  std::vector<std::size_t> level_sizes;  // set count before level 1, after each level
  std::vector<std::size_t> merge_calls;  // model calls per level

  std::size_t levels() const noexcept { return merge_calls.size(); }
  std::size_t total_calls() const noexcept;
};

struct ConsolidationResult {
  PatternSet merged;
  MergeTrace trace;
};

/// Level-wise reduction over consecutive groups of G (pool order). A
/// trailing single-member group is passed through without a model call.
ConsolidationResult consolidate(const std::vector<PatternSet>& sets, const ExtractionConfig& cfg,
                                const Gateway& gateway);

/// Tool declarations offered to the extractor during synthesis.
std::vector<ToolDecl> synthesis_tools();

struct SynthesisResult {
  SkillStore store;
  std::size_t turns = 0;
  std::vector<std::string> tool_log;  // "<tool>: <result>" per call
};

/// Drives the create/update/delete/finish tool loop against an empty store.
/// Store errors are returned to the model as tool results. Raises
/// SynthesisStalled when the turn cap is reached with no skill created.
SynthesisResult synthesize_skills(const PatternSet& consolidated, const ExtractionConfig& cfg,
                                  const Gateway& gateway);

struct ExtractionResult {
  SkillStore store;
  std::vector<PatternSet> per_trajectory;
  PatternSet consolidated;
  MergeTrace merge;
  std::size_t analysis_calls = 0;
  std::size_t synthesis_turns = 0;
};

/// Full pipeline: parallel analysis, consolidation, synthesis.
ExtractionResult extract(const ExperiencePool& pool, const ExtractionConfig& cfg, const Gateway& gateway);

struct RewriteOptions {
  std::string model;
  SkillBudget budget;
  double temperature = 1.0;
};

/// Rewrites a skill body into another presentation format. Each attempt is a
/// rewrite call followed by a verification call; after two rejected attempts
/// FormatRewriteFailed is raised. Name and description are preserved.
Skill rewrite_format(const Skill& skill, prompts::BodyFormat format, const Gateway& gateway,
                     const RewriteOptions& options);

}  // namespace skillcraft
