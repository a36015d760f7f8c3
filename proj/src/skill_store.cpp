#include "skillcraft/skill_store.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "skillcraft/error.hpp"

namespace skillcraft {

using nlohmann::json;

void SkillBudget::check() const {
  if (max_skills == 0) throw Error(ErrorKind::InvalidArgument, "max_skills must be positive");
  if (max_skill_chars == 0) throw Error(ErrorKind::InvalidArgument, "max_skill_chars must be positive");
  if (max_total_chars && *max_total_chars == 0)
    throw Error(ErrorKind::InvalidArgument, "max_total_chars must be positive when set");
}

std::size_t char_count(std::string_view utf8) noexcept {
  std::size_t n = 0;
  for (unsigned char c : utf8) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

bool is_valid_slug(std::string_view name) noexcept {
  if (name.empty() || name.size() > kMaxSkillNameChars) return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-';
  });
}

bool ValidationVerdict::has(Violation::Category c) const noexcept {
  return std::any_of(violations.begin(), violations.end(),
                     [c](const Violation& v) { return v.category == c; });
}

std::string ValidationVerdict::summary() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < violations.size(); ++i) {
    if (i) os << "; ";
    os << violations[i].field << ": " << violations[i].message;
  }
  return os.str();
}

namespace {

void check_attachments(const std::map<std::string, std::string>& files, const char* field,
                       std::vector<Violation>& out) {
  for (const auto& [filename, content] : files) {
    if (filename.empty() || filename.find_first_of(" \t\r\n/") != std::string::npos) {
      out.push_back({Violation::Category::Schema, field,
                     "invalid filename '" + filename + "' (no whitespace or slashes)"});
    }
    if (content.size() > kMaxAttachmentBytes) {
      out.push_back({Violation::Category::Budget, field,
                     "file '" + filename + "' is " + std::to_string(content.size()) +
                         " bytes, limit " + std::to_string(kMaxAttachmentBytes)});
    }
  }
}

}  // namespace

ValidationVerdict validate_skill(const Skill& candidate, const SkillBudget& budget) {
  ValidationVerdict verdict;
  auto& v = verdict.violations;
  using C = Violation::Category;

  if (candidate.name.empty()) {
    v.push_back({C::Schema, "name", "must not be empty"});
  } else {
    if (candidate.name.size() > kMaxSkillNameChars)
      v.push_back({C::Schema, "name",
                   "length " + std::to_string(candidate.name.size()) + " exceeds " +
                       std::to_string(kMaxSkillNameChars)});
    if (!std::all_of(candidate.name.begin(), candidate.name.end(), [](char c) {
          return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-';
        }))
      v.push_back({C::Schema, "name",
                   "must be a lowercase-hyphen slug (a-z, 0-9, '-'), got '" + candidate.name + "'"});
  }

  if (candidate.description.empty()) {
    v.push_back({C::Schema, "description", "must not be empty"});
  } else {
    if (candidate.description.find('\n') != std::string::npos)
      v.push_back({C::Schema, "description", "must be a single line"});
    const auto n = char_count(candidate.description);
    if (n > kMaxDescriptionChars)
      v.push_back({C::Budget, "description",
                   "length " + std::to_string(n) + " exceeds " +
                       std::to_string(kMaxDescriptionChars) + " characters (1-2 sentences)"});
  }

  if (candidate.body.empty()) v.push_back({C::Schema, "body", "must not be empty"});
  const auto body_chars = char_count(candidate.body);
  if (body_chars > budget.max_skill_chars)
    v.push_back({C::Budget, "body",
                 "length " + std::to_string(body_chars) + " exceeds max_skill_chars " +
                     std::to_string(budget.max_skill_chars)});
  if (budget.max_total_chars && body_chars > *budget.max_total_chars)
    v.push_back({C::Budget, "body",
                 "length " + std::to_string(body_chars) + " exceeds max_total_chars " +
                     std::to_string(*budget.max_total_chars)});

  check_attachments(candidate.references, "references", v);
  check_attachments(candidate.scripts, "scripts", v);
  return verdict;
}

SkillStore::SkillStore(SkillBudget budget) : budget_(budget) { budget_.check(); }

const Skill* SkillStore::find(std::string_view name) const noexcept {
  auto it = std::find_if(skills_.begin(), skills_.end(),
                         [name](const Skill& s) { return s.name == name; });
  return it == skills_.end() ? nullptr : &*it;
}

std::size_t SkillStore::total_body_chars() const noexcept {
  std::size_t total = 0;
  for (const auto& s : skills_) total += char_count(s.body);
  return total;
}

void SkillStore::require_unsealed() const {
  if (sealed_) throw Error(ErrorKind::StoreSealed, "skill store is sealed; no further mutations");
}

void SkillStore::check_candidate(const Skill& candidate) const {
  const auto verdict = validate_skill(candidate, budget_);
  if (verdict.has(Violation::Category::Schema))
    throw Error(ErrorKind::SchemaViolation, "schema violation: " + verdict.summary());
  if (!verdict.ok())
    throw Error(ErrorKind::BudgetExceeded,
                "budget exceeded: " + verdict.summary() + ". Shorten and retry.");
}

void SkillStore::check_total(std::size_t total) const {
  if (budget_.max_total_chars && total > *budget_.max_total_chars)
    throw Error(ErrorKind::BudgetExceeded,
                "budget exceeded: total body length " + std::to_string(total) +
                    " exceeds max_total_chars " + std::to_string(*budget_.max_total_chars) +
                    ". Shorten and retry.");
}

void SkillStore::create(const Skill& candidate) {
  require_unsealed();
  check_candidate(candidate);
  if (find(candidate.name))
    throw Error(ErrorKind::DuplicateName, "a skill named '" + candidate.name + "' already exists");
  if (skills_.size() + 1 > budget_.max_skills)
    throw Error(ErrorKind::BudgetExceeded,
                "budget exceeded: store already holds " + std::to_string(skills_.size()) +
                    " of max_skills " + std::to_string(budget_.max_skills) +
                    ". Update or delete an existing skill instead.");
  check_total(total_body_chars() + char_count(candidate.body));
  skills_.push_back(candidate);
}

void SkillStore::update(std::string_view name, const Skill& candidate) {
  require_unsealed();
  auto it = std::find_if(skills_.begin(), skills_.end(),
                         [name](const Skill& s) { return s.name == name; });
  if (it == skills_.end())
    throw Error(ErrorKind::NotFound, "no skill named '" + std::string(name) + "'");
  check_candidate(candidate);
  if (candidate.name != name && find(candidate.name))
    throw Error(ErrorKind::DuplicateName, "a skill named '" + candidate.name + "' already exists");
  check_total(total_body_chars() - char_count(it->body) + char_count(candidate.body));
  *it = candidate;
}

void SkillStore::remove(std::string_view name) {
  require_unsealed();
  auto it = std::find_if(skills_.begin(), skills_.end(),
                         [name](const Skill& s) { return s.name == name; });
  if (it == skills_.end())
    throw Error(ErrorKind::NotFound, "no skill named '" + std::string(name) + "'");
  skills_.erase(it);
}

std::uint64_t SkillStore::digest() const {
  json j = {{"sealed", sealed_}, {"skills", skills_to_json(skills_)}};
  const std::string bytes = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool SkillStore::invariants_hold() const {
  if (skills_.size() > budget_.max_skills) return false;
  if (budget_.max_total_chars && total_body_chars() > *budget_.max_total_chars) return false;
  for (std::size_t i = 0; i < skills_.size(); ++i) {
    if (!validate_skill(skills_[i], budget_).ok()) return false;
    for (std::size_t j = i + 1; j < skills_.size(); ++j)
      if (skills_[i].name == skills_[j].name) return false;
  }
  return true;
}

void to_json(json& j, const Skill& s) {
  j = json{{"name", s.name},
           {"description", s.description},
           {"body", s.body},
           {"references", s.references},
           {"scripts", s.scripts}};
}

void from_json(const json& j, Skill& s) {
  if (!j.is_object()) throw Error(ErrorKind::Parse, "skill document must be a JSON object");
  auto str = [&](const char* key) -> std::string {
    if (!j.contains(key) || !j.at(key).is_string())
      throw Error(ErrorKind::Parse, std::string("skill field '") + key + "' must be a string");
    return j.at(key).get<std::string>();
  };
  auto files = [&](const char* key) {
    std::map<std::string, std::string> out;
    if (!j.contains(key) || j.at(key).is_null()) return out;
    if (!j.at(key).is_object())
      throw Error(ErrorKind::Parse, std::string("skill field '") + key + "' must be an object");
    for (const auto& [k, v] : j.at(key).items()) {
      if (!v.is_string())
        throw Error(ErrorKind::Parse, std::string("skill ") + key + " entry '" + k +
                                          "' must be a string");
      out.emplace(k, v.get<std::string>());
    }
    return out;
  };
  s.name = str("name");
  s.description = str("description");
  s.body = str("body");
  s.references = files("references");
  s.scripts = files("scripts");
}

json skills_to_json(const std::vector<Skill>& skills) {
  json arr = json::array();
  for (const auto& s : skills) arr.push_back(s);
  return arr;
}

std::vector<Skill> skills_from_json(const json& j) {
  if (!j.is_array()) throw Error(ErrorKind::Parse, "skill set must be a JSON array");
  std::vector<Skill> out;
  out.reserve(j.size());
  for (const auto& item : j) out.push_back(item.get<Skill>());
  return out;
}

std::vector<Skill> load_skill_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open skill file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, "skill file '" + path + "': " + e.what());
  }
  return skills_from_json(j);
}

void save_skill_file(const std::string& path, const std::vector<Skill>& skills) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write skill file '" + path + "'");
  out << skills_to_json(skills).dump(2) << '\n';
}

}  // namespace skillcraft
