#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "skillcraft/skill_store.hpp"

namespace skillcraft {

/// Bumped whenever any template text changes; recorded with extraction output.
inline constexpr std::string_view kPromptVersion = "1.0";

/// Replaces every "[key]" occurrence of each map key. Throws InvalidArgument
/// when a key does not occur in the template.
std::string fill_placeholders(std::string_view tmpl, const std::map<std::string, std::string>& values);

namespace prompts {

enum class Polarity { Success, Failure };

// Raw templates with their named placeholders, kept as versioned assets.
extern const std::string_view kAnalysisTemplate;     // [polarity], [per_type_guidance], [K]
extern const std::string_view kMergeTemplate;
extern const std::string_view kSynthesisTemplate;    // [max_skills], [max_skill_chars], [max_total_chars]
extern const std::string_view kPairwiseTemplate;     // [domain], [skill_1], [skill_2]

std::string analysis_system(Polarity polarity, std::size_t max_patterns,
                            const std::optional<std::string>& guidance);
std::string merge_system();
std::string synthesis_system(const SkillBudget& budget, const std::optional<std::string>& guidance);

/// Appends an extraction-quality guidance block to a system prompt.
std::string with_guidance(std::string system, const std::optional<std::string>& guidance);

/// The document a judge sees for one skill.
std::string skill_document(const Skill& skill);

std::string pairwise_judge(std::string_view domain_description, std::string_view skill_1,
                           std::string_view skill_2);

struct DimensionText {
  std::string name;
  std::string definition;
};

/// Per-dimension comparison; `ask_overall` adds the holistic tie-break field.
std::string dimension_judge(std::string_view domain_description, std::string_view skill_1,
                            std::string_view skill_2, const std::vector<DimensionText>& dims,
                            bool ask_overall);

std::string rubric_differences(std::string_view domain_description, std::string_view higher,
                               std::string_view lower);
std::string rubric_consolidation(const std::vector<DimensionText>& candidates, std::size_t target_count);

enum class BodyFormat { OrderedList, UnorderedList, Checklist, Prose };

std::string_view format_name(BodyFormat f) noexcept;
std::string format_rewrite(const Skill& skill, BodyFormat format);
std::string format_verification(const Skill& original, std::string_view rewritten_body, BodyFormat format);

}  // namespace prompts
}  // namespace skillcraft
