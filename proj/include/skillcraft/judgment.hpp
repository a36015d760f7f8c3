#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "skillcraft/model_gateway.hpp"
#include "skillcraft/skill_store.hpp"

namespace skillcraft {

/// Which member of a pair a judgment favours.
enum class Choice { A, B };

std::string_view to_string(Choice c) noexcept;

/// A skill with its measured Δ for one (target, domain) cell.
struct SkillArtifact {
  std::string extractor;
  std::string target;
  std::string domain;
  double delta = 0.0;
  Skill skill;
};

struct SkillPair {
  std::string id;
  std::string target;
  std::string domain;
  Skill skill_a;
  Skill skill_b;
  double delta_a = 0.0;
  double delta_b = 0.0;

  double gap() const noexcept;
  /// The member with the larger Δ.
  Choice higher() const noexcept;
};

/// Every unordered within-group pair whose gap is strictly above `min_gap`,
/// in input order. Artifacts from different (target, domain) groups are
/// never paired.
std::vector<SkillPair> build_pairs(const std::vector<SkillArtifact>& artifacts, double min_gap = 0.5);

struct JudgeVerdict {
  std::vector<Choice> votes;               // parsed votes that entered the majority
  std::vector<bool> presentation_orders;   // true when skill_b was shown as "Skill 1"
  Choice majority = Choice::A;
  std::uint64_t seed = 0;
  std::size_t discarded = 0;               // votes dropped as unparseable or to keep the count odd
};

struct JudgeOptions {
  std::size_t votes = 9;
  std::uint64_t seed = 0;
  std::size_t concurrency = 1;
  std::string model;
  double temperature = 1.0;
  /// Domain id → description shown to the judge. Falls back to the id.
  std::map<std::string, std::string> domain_descriptions;

  /// Throws InvalidArgument when votes is even or zero.
  void check() const;
};

/// Majority of `votes` pairwise judgments, each with an independently drawn
/// presentation order.
JudgeVerdict judge_pair_unguided(const SkillPair& pair, const Gateway& gateway, const JudgeOptions& opts);

struct RubricDimension {
  std::string name;
  std::string definition;
  std::optional<double> better_rate;
};

/// Like judge_pair_unguided, but each vote scores the rubric dimensions and
/// prefers the skill with more dimension wins; equal wins defer to the
/// holistic choice asked for in the same reply.
JudgeVerdict judge_pair_guided(const SkillPair& pair, const std::vector<RubricDimension>& rubric,
                               const Gateway& gateway, const JudgeOptions& opts);

struct PairJudgment {
  SkillPair pair;
  std::optional<JudgeVerdict> verdict;
  std::optional<std::string> error;  // set when the pair could not be judged

  bool correct() const noexcept { return verdict && verdict->majority == pair.higher(); }
};

/// Judges every pair (guided when `rubric` is non-empty). Pair i uses seed
/// mix_seed(opts.seed, i). A failing pair is recorded and the run continues.
std::vector<PairJudgment> judge_pairs(const std::vector<SkillPair>& pairs, const std::vector<RubricDimension>& rubric,
                                      const Gateway& gateway, const JudgeOptions& opts);

struct AccuracySummary {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const noexcept { return total ? double(correct) / double(total) : 0.0; }
};

/// Over the judgments that produced a verdict.
AccuracySummary accuracy(const std::vector<PairJudgment>& judgments);

struct AccuracyBucket {
  double lower = 0.0;
  std::optional<double> upper;  // nullopt: unbounded
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const noexcept { return double(correct) / double(total); }
};

inline const std::vector<double> kDefaultBucketEdges{0.5, 1.0, 2.0, 5.0};

/// Buckets [e0, e1), [e1, e2), ..., [e_last, ∞) over the gap. Only non-empty
/// buckets are returned. Throws InvalidArgument when a gap falls below the
/// first edge or the edges are not increasing.
std::vector<AccuracyBucket> bucket_accuracy(const std::vector<PairJudgment>& judgments,
                                            const std::vector<double>& edges = kDefaultBucketEdges);

std::string accuracy_table(const AccuracySummary& overall, const std::vector<AccuracyBucket>& buckets);

struct RubricOptions {
  std::size_t dimensions = 7;
  std::size_t max_consolidation_rounds = 3;
  double threshold = 0.64;
  std::uint64_t seed = 0;
  std::string model;
  double temperature = 1.0;
  std::map<std::string, std::string> domain_descriptions;
};

/// Per-pair difference extraction followed by repeated consolidation until
/// at most `dimensions` remain (or the round cap is hit, after which the list
/// is truncated).
std::vector<RubricDimension> discover_rubric(const std::vector<SkillPair>& pairs, const Gateway& gateway,
                                             const RubricOptions& opts);

struct RubricValidation {
  std::vector<RubricDimension> raw;        // with better_rate filled in
  std::vector<RubricDimension> validated;  // better_rate ≥ threshold, raw order
};

/// One dimension-wise comparison per pair; the higher-Δ skill scores 1 for a
/// win, 0.5 for a tie and 0 for a loss. Unparseable replies count as ties.
RubricValidation validate_rubric(const std::vector<RubricDimension>& rubric, const std::vector<SkillPair>& pairs,
                                 const Gateway& gateway, const RubricOptions& opts);

/// Guidance block for ExtractionConfig::guidance. Throws InvalidArgument on
/// an empty rubric.
std::string emit_meta_skill(const std::vector<RubricDimension>& validated);

void to_json(nlohmann::json& j, const SkillArtifact& a);
void from_json(const nlohmann::json& j, SkillArtifact& a);
void to_json(nlohmann::json& j, const SkillPair& p);
void from_json(const nlohmann::json& j, SkillPair& p);
void to_json(nlohmann::json& j, const JudgeVerdict& v);
void to_json(nlohmann::json& j, const PairJudgment& p);
void to_json(nlohmann::json& j, const RubricDimension& d);
void from_json(const nlohmann::json& j, RubricDimension& d);

std::vector<SkillPair> read_pairs_jsonl(std::istream& in);
void write_pairs_jsonl(std::ostream& out, const std::vector<SkillPair>& pairs);
/// Rubric document: {"dimensions": [{name, definition, better_rate?}]}.
std::vector<RubricDimension> load_rubric_file(const std::string& path);

}  // namespace skillcraft
