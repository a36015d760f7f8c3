#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "skillcraft/skill_store.hpp"

namespace skillcraft {

enum class InjectionMode { SingleInline, MultiTool };

/// System-prompt section that inlines exactly one skill.
std::string render_single(const Skill& skill);

/// Fields recovered from a render_single section.
struct InlineSkillFields {
  std::string name;
  std::string description;
  std::string body;
};

/// Inverse of render_single for name/description/body. Throws Parse when the
/// text is not a single-skill section.
InlineSkillFields parse_single(std::string_view section);

/// System-prompt section announcing a library of N skills and the text-mode
/// skill tools. Requires a sealed, non-empty store.
std::string render_multi_preamble(const SkillStore& store);

/// Picks single-inline for exactly one skill, multi-tool otherwise.
InjectionMode choose_mode(const SkillStore& store) noexcept;

struct ToolExchange {
  std::string request;
  std::string response;
};

/// Read-only view over a sealed store answering ```skill blocks.
class DisclosureSession {
 public:
  explicit DisclosureSession(const SkillStore& store);

  /// Answers one block body ("list_skills", "view_skill <name>",
  /// "read_skill_file <name> <file>"). Failures come back in-band.
  std::string handle_skill_block(std::string_view block);

  /// Answers a full model reply: runs its ```skill block, or returns a
  /// protocol reminder when it mixes skill and python blocks. Returns an
  /// empty string when the reply holds no skill block.
  std::string handle_model_reply(std::string_view reply);

  const std::vector<ToolExchange>& transcript() const noexcept { return transcript_; }

 private:
  std::string respond(std::string_view block) const;

  const SkillStore& store_;
  std::vector<ToolExchange> transcript_;
};

/// Bodies of all fenced blocks with the given language tag, in order.
std::vector<std::string> fenced_blocks(std::string_view text, std::string_view language);

}  // namespace skillcraft
