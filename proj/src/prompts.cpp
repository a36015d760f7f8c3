#include "skillcraft/prompts.hpp"

#include "skillcraft/error.hpp"

namespace skillcraft {

std::string fill_placeholders(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  // Single pass over the template, so substituted values are never rescanned.
  std::string out;
  out.reserve(tmpl.size());
  std::map<std::string, bool> seen;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '[') {
      const auto close = tmpl.find(']', i + 1);
      if (close != std::string_view::npos) {
        const std::string key(tmpl.substr(i + 1, close - i - 1));
        if (auto it = values.find(key); it != values.end()) {
          out += it->second;
          seen[key] = true;
          i = close + 1;
          continue;
        }
      }
    }
    out += tmpl[i++];
  }
  for (const auto& [key, value] : values) {
    if (!seen.count(key))
      throw Error(ErrorKind::InvalidArgument, "template has no placeholder [" + key + "]");
  }
  return out;
}

namespace prompts {

const std::string_view kAnalysisTemplate =
    R"(You analyse a single agent trajectory and extract [polarity] -- high-level, reusable, transferable behavioural patterns. Focus on genuinely novel, reusable patterns from THIS trajectory; do NOT try to be exhaustive.

**What is a pattern?** A pattern is a high-level behaviour that is (1) transferable across a broad class of tasks, (2) actionable enough to follow, (3) non-obvious -- going beyond common sense, and (4) self-contained -- understandable without the original trajectory.

[per_type_guidance]

**Quality requirements.** Each pattern must be (i) high-level and domain-general, (ii) maximally broad in coverage, (iii) information-dense with a concrete description, and (iv) free of task-specific details (no specific file names, identifiers, error messages, or API calls).

**Constraints.** Extract at most [K] patterns from this trajectory; each as a pattern name and a 2-4 sentence description.

**Output format.** A JSON list of {`type`, `pattern`, `description`} entries plus a brief `summary`. If no useful patterns are found, return an empty list.)";

namespace {

constexpr std::string_view kSuccessGuidance =
    R"(**Per-type guidance (success).** Capture effective strategies, decision patterns, and methodological insights. Ask: "What did this agent do RIGHT that other agents facing similar tasks should also do?")";

constexpr std::string_view kFailureGuidance =
    R"(**Per-type guidance (failure).** Capture error patterns, anti-patterns, and non-obvious pitfalls. Ask: "What should an agent AVOID doing when facing similar tasks?")";

}  // namespace

const std::string_view kMergeTemplate =
    R"(You receive several pattern sets, each extracted from a different agent trajectory, and merge them into a single consolidated pattern set.

**Guidelines.**
1. **Deduplicate**: if multiple patterns describe the same or overlapping behaviour, combine them into ONE stronger pattern with the best description.
2. **Generalise**: raise the abstraction level to cover more scenarios; a single well-generalised pattern is worth more than several narrow ones.
3. **Preserve type**: keep success and failure patterns separate; do NOT convert between types.
4. **Preserve quality**: drop vague or low-value patterns; keep concrete, actionable ones.
5. **Prioritise**: when there are too many patterns, retain the most important and broadly applicable ones.

**Quality requirements.** Each merged pattern must be transferable across tasks, information-dense, non-obvious, and free of task-specific details.

**Output format.** A JSON object with the consolidated success and failure patterns plus a brief `summary` of merge decisions.)";

const std::string_view kSynthesisTemplate =
    R"(You receive a consolidated set of success and failure patterns and synthesise them into skills by issuing tool calls against the skill store.

**Synthesis strategy.**
1. **Integrate both polarities**: a good skill includes both what TO DO (from success patterns) and what to AVOID (from failure patterns).
2. **Organise thematically**: group related patterns into coherent skills around shared themes.
3. **Structure the body clearly**: recommended approaches, common pitfalls, decision criteria for when to apply, and verification methods.
4. **Maintain information density**: every sentence carries actionable content; no platitudes.
5. **Keep the description short**: 1-2 sentences only; all detail goes in the body.

**Schema requirements.** `name` (lowercase-hyphen slug, <= 64 chars); `description` (1-2 sentences: what class of problems, when to apply); `body` (Markdown with strategies, pitfalls, decision criteria, verification); optional `references` and `scripts`.

**Budget.** Maximum [max_skills] skills, each <= [max_skill_chars] characters (strictly enforced); optional total budget [max_total_chars]. On a length error, shorten and retry.

**Operating rules.** Skills MUST be submitted via the creation tool (plain text in the response is ignored). After all skills are added, signal completion via the finish tool. On tool errors, fix the issue and retry the call.)";

const std::string_view kPairwiseTemplate =
    R"(You are comparing two agent skill documents
meant to help an AI agent.
Domain: [domain]

Skill 1:
```
[skill_1]
```

Skill 2:
```
[skill_2]
```

Which skill document will produce better agent
performance? You MUST choose one.
Reply with JSON: {"choice": "Skill 1" or "Skill 2"})";

std::string with_guidance(std::string system, const std::optional<std::string>& guidance) {
  if (guidance && !guidance->empty()) {
    system += "\n\n";
    system += *guidance;
  }
  return system;
}

std::string analysis_system(Polarity polarity, std::size_t max_patterns,
                            const std::optional<std::string>& guidance) {
  const bool success = polarity == Polarity::Success;
  return with_guidance(
      fill_placeholders(kAnalysisTemplate,
                        {{"polarity", success ? "success patterns" : "failure patterns"},
                         {"per_type_guidance", std::string(success ? kSuccessGuidance : kFailureGuidance)},
                         {"K", std::to_string(max_patterns)}}),
      guidance);
}

std::string merge_system() { return std::string(kMergeTemplate); }

std::string synthesis_system(const SkillBudget& budget, const std::optional<std::string>& guidance) {
  return with_guidance(
      fill_placeholders(kSynthesisTemplate,
                        {{"max_skills", std::to_string(budget.max_skills)},
                         {"max_skill_chars", std::to_string(budget.max_skill_chars)},
                         {"max_total_chars", budget.max_total_chars
                                                 ? std::to_string(*budget.max_total_chars)
                                                 : std::string("none")}}),
      guidance);
}

std::string skill_document(const Skill& skill) {
  std::string out = "# " + skill.name + "\n\n" + skill.description + "\n\n" + skill.body;
  for (const auto& [file, content] : skill.references) out += "\n\n## Reference: " + file + "\n" + content;
  for (const auto& [file, content] : skill.scripts) out += "\n\n## Script: " + file + "\n" + content;
  return out;
}

std::string pairwise_judge(std::string_view domain_description, std::string_view skill_1,
                           std::string_view skill_2) {
  return fill_placeholders(kPairwiseTemplate, {{"domain", std::string(domain_description)},
                                               {"skill_1", std::string(skill_1)},
                                               {"skill_2", std::string(skill_2)}});
}

namespace {

std::string two_skills_header(std::string_view domain_description, std::string_view skill_1,
                              std::string_view skill_2) {
  std::string out = "You are comparing two agent skill documents\nmeant to help an AI agent.\nDomain: ";
  out += domain_description;
  out += "\n\nSkill 1:\n```\n";
  out += skill_1;
  out += "\n```\n\nSkill 2:\n```\n";
  out += skill_2;
  out += "\n```\n\n";
  return out;
}

std::string numbered_dimensions(const std::vector<DimensionText>& dims) {
  std::string out;
  for (std::size_t i = 0; i < dims.size(); ++i)
    out += std::to_string(i + 1) + ". **" + dims[i].name + "**: " + dims[i].definition + "\n";
  return out;
}

}  // namespace

std::string dimension_judge(std::string_view domain_description, std::string_view skill_1,
                            std::string_view skill_2, const std::vector<DimensionText>& dims,
                            bool ask_overall) {
  std::string out = two_skills_header(domain_description, skill_1, skill_2);
  out += "Score the two skill documents along each of the following dimensions. For each dimension, "
         "decide which skill is stronger, or \"tie\" if neither is.\n\n";
  out += numbered_dimensions(dims);
  out += "\n";
  std::string fields;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) fields += ", ";
    fields += "\"" + dims[i].name + "\": \"Skill 1\" or \"Skill 2\" or \"tie\"";
  }
  if (ask_overall) {
    out += "Then make an overall choice of the skill that will produce better agent performance; it "
           "is used when the dimension wins are tied. You MUST choose one.\n";
    out += "Reply with JSON: {\"dimensions\": {" + fields +
           "}, \"overall\": \"Skill 1\" or \"Skill 2\"}";
  } else {
    out += "Reply with JSON: {\"dimensions\": {" + fields + "}}";
  }
  return out;
}

std::string rubric_differences(std::string_view domain_description, std::string_view higher,
                               std::string_view lower) {
  std::string out =
      "You compare two agent skill documents extracted for the same target model and domain. The "
      "first produced a larger measured improvement in downstream agent performance than the "
      "second.\nDomain: ";
  out += domain_description;
  out += "\n\nHigher-utility skill:\n```\n";
  out += higher;
  out += "\n```\n\nLower-utility skill:\n```\n";
  out += lower;
  out += "\n```\n\n"
         "List the differences along which the higher-utility skill outperforms the lower-utility "
         "one. Name each difference as a general quality dimension that could be checked on any "
         "skill, with a one-sentence definition. If there are none, return an empty list.\n"
         "Reply with JSON: {\"differences\": [{\"dimension\": \"...\", \"definition\": \"...\"}]}";
  return out;
}

std::string rubric_consolidation(const std::vector<DimensionText>& candidates, std::size_t target_count) {
  std::string out =
      "You receive candidate quality dimensions, each describing a way in which a higher-utility "
      "agent skill outperformed a lower-utility one. Merge duplicates and overlapping candidates, "
      "generalise where needed, and consolidate them into at most " +
      std::to_string(target_count) +
      " distinct dimensions, ordered by how often they recur.\n\nCandidates:\n";
  out += numbered_dimensions(candidates);
  out += "\nReply with JSON: {\"dimensions\": [{\"name\": \"...\", \"definition\": \"...\"}]}";
  return out;
}

std::string_view format_name(BodyFormat f) noexcept {
  switch (f) {
    case BodyFormat::OrderedList: return "ordered_list";
    case BodyFormat::UnorderedList: return "unordered_list";
    case BodyFormat::Checklist: return "checklist";
    case BodyFormat::Prose: return "prose";
  }
  return "prose";
}

namespace {

std::string_view format_instruction(BodyFormat f) {
  switch (f) {
    case BodyFormat::OrderedList: return "an ordered list (flat numbered steps)";
    case BodyFormat::UnorderedList: return "an unordered list (bullet points)";
    case BodyFormat::Checklist: return "a checklist (checkbox items, \"- [ ] ...\")";
    case BodyFormat::Prose: return "prose (flowing paragraphs, no lists)";
  }
  return "prose";
}

}  // namespace

std::string format_rewrite(const Skill& skill, BodyFormat format) {
  std::string out = "Rewrite the body of the following agent skill into ";
  out += format_instruction(format);
  out += ". Preserve all semantic content: every strategy, pitfall, condition, and verification "
         "step must survive the rewrite; change only the presentation format. Reply with the "
         "rewritten Markdown body only.\n\nSkill name: " +
         skill.name + "\nDescription: " + skill.description + "\n\nBody:\n```\n" + skill.body + "\n```";
  return out;
}

std::string format_verification(const Skill& original, std::string_view rewritten_body, BodyFormat format) {
  std::string out = "Check a format rewrite of an agent skill body. The rewrite must preserve all "
                    "semantic content of the original and must be written as ";
  out += format_instruction(format);
  out += ".\n\nOriginal body:\n```\n" + original.body + "\n```\n\nRewritten body:\n```\n";
  out += rewritten_body;
  out += "\n```\n\nReply with JSON: {\"approved\": true or false, \"reason\": \"...\"}";
  return out;
}

}  // namespace prompts
}  // namespace skillcraft
