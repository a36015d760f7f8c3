#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace skillcraft {

inline constexpr std::size_t kMaxSkillNameChars = 64;
inline constexpr std::size_t kMaxDescriptionChars = 400;
inline constexpr std::size_t kMaxAttachmentBytes = 16 * 1024;

/// A procedural skill: the unit the extractor produces and the target consumes.
struct Skill {
  std::string name;
  std::string description;
  std::string body;  // markdown
  std::map<std::string, std::string> references;
  std::map<std::string, std::string> scripts;

  bool operator==(const Skill&) const = default;
};

struct SkillBudget {
  std::size_t max_skills = 1;
  std::size_t max_skill_chars = 3000;
  std::optional<std::size_t> max_total_chars;

  /// Throws InvalidArgument when any count is zero.
  void check() const;
};

/// Length of a UTF-8 string in code points. Invalid bytes count as one each.
std::size_t char_count(std::string_view utf8) noexcept;

bool is_valid_slug(std::string_view name) noexcept;

struct Violation {
  enum class Category { Schema, Budget };
  Category category;
  std::string field;
  std::string message;
};

struct ValidationVerdict {
  std::vector<Violation> violations;

  bool ok() const noexcept { return violations.empty(); }
  bool has(Violation::Category c) const noexcept;
  std::string summary() const;
};

/// Checks one skill against the schema and the per-skill budget. Never throws.
ValidationVerdict validate_skill(const Skill& candidate, const SkillBudget& budget);

/// Writable skill collection mutated by the synthesis tool loop.
///
/// Mutations are all-or-nothing: a rejected call leaves the store untouched.
/// Iteration order is insertion order.
class SkillStore {
 public:
  explicit SkillStore(SkillBudget budget = {});

  void create(const Skill& candidate);
  void update(std::string_view name, const Skill& candidate);
  void remove(std::string_view name);

  /// Idempotent.
  void seal() noexcept { sealed_ = true; }

  bool sealed() const noexcept { return sealed_; }
  bool empty() const noexcept { return skills_.empty(); }
  std::size_t size() const noexcept { return skills_.size(); }
  const SkillBudget& budget() const noexcept { return budget_; }
  const std::vector<Skill>& skills() const noexcept { return skills_; }
  const Skill* find(std::string_view name) const noexcept;
  std::size_t total_body_chars() const noexcept;

  /// FNV-1a over the canonical JSON form; used to prove read-only access.
  std::uint64_t digest() const;

  /// Every store invariant; used by property tests.
  bool invariants_hold() const;

 private:
  void require_unsealed() const;
  void check_candidate(const Skill& candidate) const;
  void check_total(std::size_t total) const;

  SkillBudget budget_;
  std::vector<Skill> skills_;
  bool sealed_ = false;
};

void to_json(nlohmann::json& j, const Skill& s);
void from_json(const nlohmann::json& j, Skill& s);

nlohmann::json skills_to_json(const std::vector<Skill>& skills);
std::vector<Skill> skills_from_json(const nlohmann::json& j);

std::vector<Skill> load_skill_file(const std::string& path);
void save_skill_file(const std::string& path, const std::vector<Skill>& skills);

}  // namespace skillcraft
