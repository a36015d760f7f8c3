#include "skillcraft/injection.hpp"

#include <sstream>

#include "skillcraft/error.hpp"

namespace skillcraft {

namespace {

constexpr std::string_view kSingleHeader =
    "## Skill Reference\n"
    "\n"
    "Below is a reusable procedural skill extracted from previous successful problem-solving "
    "experiences. It may help you solve the current task more effectively. Use it as a reference "
    "-- adapt it to the specific task at hand.\n"
    "\n"
    "### ";

constexpr std::string_view kReferenceHeading = "\n\n#### Reference Files\n";
constexpr std::string_view kScriptHeading = "\n\n#### Script Files\n";
constexpr std::string_view kSingleNote =
    "\n\n**Note:** This skill is an optional aid, not a mandatory procedure. Use your own judgment.\n";

constexpr std::string_view kMultiTemplate =
    "## Skill Library\n"
    "\n"
    "You have access to a **Skill Library** containing [N] reusable procedural skills extracted "
    "from previous successful problem-solving experiences. These skills may help you solve the "
    "current task more effectively.\n"
    "\n"
    "**Available skill tools.**\n"
    "- `list_skills`: see all available skills (name, description).\n"
    "- `view_skill <skill_name>`: read the full body of a specific skill; also lists attached file names.\n"
    "- `read_skill_file <skill_name> <filename>`: read the content of an attached reference or script.\n"
    "\n"
    "**How to use skill tools.** Call a skill tool with a ```skill ... ``` block (NOT a ```python ... ``` block).\n"
    "\n"
    "**Workflow.**\n"
    "1. At the start, call `list_skills` to see what is available.\n"
    "2. If a skill seems relevant, call `view_skill` to read its body.\n"
    "3. If it has attached files, use `read_skill_file`.\n"
    "4. Adapt the skill's guidance to the specific task.\n"
    "5. After consulting skills, proceed with ```python ... ``` code blocks.\n"
    "\n"
    "**Important notes.** Skill tools are read-only. Each response should contain EITHER a "
    "```skill``` block OR a ```python``` block, not both. Skills are optional aids, not mandatory "
    "procedures.\n";

constexpr std::string_view kToolList = "list_skills, view_skill, read_skill_file";

void append_files(std::string& out, std::string_view heading, const std::map<std::string, std::string>& files) {
  if (files.empty()) return;
  out += heading;
  bool first = true;
  for (const auto& [name, content] : files) {
    if (!first) out += '\n';
    first = false;
    out += name + ": " + content;
  }
}

}  // namespace

std::string render_single(const Skill& skill) {
  std::string out(kSingleHeader);
  out += skill.name + "\n\n" + skill.description + "\n\n" + skill.body;
  append_files(out, kReferenceHeading, skill.references);
  append_files(out, kScriptHeading, skill.scripts);
  out += kSingleNote;
  return out;
}

InlineSkillFields parse_single(std::string_view section) {
  if (section.substr(0, kSingleHeader.size()) != kSingleHeader)
    throw Error(ErrorKind::Parse, "not a single-skill section: header mismatch");
  if (section.size() < kSingleNote.size() ||
      section.substr(section.size() - kSingleNote.size()) != kSingleNote)
    throw Error(ErrorKind::Parse, "not a single-skill section: closing note missing");

  std::string_view rest = section.substr(kSingleHeader.size());
  rest.remove_suffix(kSingleNote.size());

  InlineSkillFields f;
  const auto name_end = rest.find("\n\n");
  if (name_end == std::string_view::npos) throw Error(ErrorKind::Parse, "skill name line not terminated");
  f.name = std::string(rest.substr(0, name_end));
  rest.remove_prefix(name_end + 2);

  const auto desc_end = rest.find("\n\n");
  if (desc_end == std::string_view::npos) throw Error(ErrorKind::Parse, "skill description not terminated");
  f.description = std::string(rest.substr(0, desc_end));
  rest.remove_prefix(desc_end + 2);

  std::size_t body_end = rest.size();
  for (auto marker : {kReferenceHeading, kScriptHeading})
    body_end = std::min(body_end, rest.find(marker));
  f.body = std::string(rest.substr(0, body_end));
  return f;
}

std::string render_multi_preamble(const SkillStore& store) {
  if (!store.sealed()) throw Error(ErrorKind::InvalidArgument, "multi-skill preamble needs a sealed store");
  if (store.empty()) throw Error(ErrorKind::InvalidArgument, "multi-skill preamble needs at least one skill");
  std::string out(kMultiTemplate);
  const auto pos = out.find("[N]");
  out.replace(pos, 3, std::to_string(store.size()));
  return out;
}

InjectionMode choose_mode(const SkillStore& store) noexcept {
  return store.size() == 1 ? InjectionMode::SingleInline : InjectionMode::MultiTool;
}

std::vector<std::string> fenced_blocks(std::string_view text, std::string_view language) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = text.find("```", pos)) != std::string_view::npos) {
    std::size_t tag_end = pos + 3;
    while (tag_end < text.size() && text[tag_end] != '\n' && text[tag_end] != ' ' && text[tag_end] != '\t' &&
           text[tag_end] != '`')
      ++tag_end;
    const std::string_view tag = text.substr(pos + 3, tag_end - pos - 3);
    const auto close = text.find("```", tag_end);
    if (close == std::string_view::npos) break;
    if (tag == language) {
      std::string_view inner = text.substr(tag_end, close - tag_end);
      const auto a = inner.find_first_not_of(" \t\r\n");
      const auto b = inner.find_last_not_of(" \t\r\n");
      out.emplace_back(a == std::string_view::npos ? std::string_view{} : inner.substr(a, b - a + 1));
    }
    pos = close + 3;
  }
  return out;
}

DisclosureSession::DisclosureSession(const SkillStore& store) : store_(store) {
  if (!store.sealed()) throw Error(ErrorKind::InvalidArgument, "disclosure session needs a sealed store");
}

namespace {

std::vector<std::string> tokens(std::string_view block) {
  std::vector<std::string> out;
  std::istringstream in{std::string(block)};
  for (std::string t; in >> t;) out.push_back(std::move(t));
  return out;
}

std::string skill_names(const SkillStore& store) {
  std::string out;
  for (const auto& s : store.skills()) {
    if (!out.empty()) out += ", ";
    out += s.name;
  }
  return out;
}

std::string attached_files(const Skill& s) {
  std::string out;
  for (const auto* files : {&s.references, &s.scripts}) {
    for (const auto& [name, content] : *files) {
      if (!out.empty()) out += ", ";
      out += name;
    }
  }
  return out;
}

}  // namespace

std::string DisclosureSession::respond(std::string_view block) const {
  const auto args = tokens(block);
  if (args.empty()) return "Error: empty skill block. Available tools: " + std::string(kToolList) + ".";
  const std::string& tool = args[0];

  if (tool == "list_skills") {
    if (args.size() != 1) return "Error: usage: list_skills";
    std::string out;
    for (const auto& s : store_.skills()) out += s.name + " — " + s.description + "\n";
    return out;
  }

  if (tool == "view_skill") {
    if (args.size() != 2) return "Error: usage: view_skill <skill_name>";
    const Skill* s = store_.find(args[1]);
    if (!s) return "Error: unknown skill '" + args[1] + "'. Available skills: " + skill_names(store_) + ".";
    std::string out = s->body;
    if (const auto files = attached_files(*s); !files.empty()) out += "\n\nAttached files: " + files;
    return out;
  }

  if (tool == "read_skill_file") {
    if (args.size() != 3) return "Error: usage: read_skill_file <skill_name> <filename>";
    const Skill* s = store_.find(args[1]);
    if (!s) return "Error: unknown skill '" + args[1] + "'. Available skills: " + skill_names(store_) + ".";
    if (auto it = s->references.find(args[2]); it != s->references.end()) return it->second;
    if (auto it = s->scripts.find(args[2]); it != s->scripts.end()) return it->second;
    const auto files = attached_files(*s);
    return "Error: skill '" + s->name + "' has no file '" + args[2] + "'. Attached files: " +
           (files.empty() ? std::string("(none)") : files) + ".";
  }

  return "Error: unknown skill tool '" + tool + "'. Available tools: " + std::string(kToolList) + ".";
}

std::string DisclosureSession::handle_skill_block(std::string_view block) {
  std::string response = respond(block);
  transcript_.push_back({std::string(block), response});
  return response;
}

std::string DisclosureSession::handle_model_reply(std::string_view reply) {
  const auto skill = fenced_blocks(reply, "skill");
  if (skill.empty()) return {};
  if (!fenced_blocks(reply, "python").empty()) {
    std::string reminder =
        "Protocol reminder: each response should contain EITHER a ```skill``` block OR a ```python``` "
        "block, not both. Resend the skill call on its own.";
    transcript_.push_back({std::string(reply), reminder});
    return reminder;
  }
  std::string out;
  for (const auto& block : skill) {
    if (!out.empty()) out += "\n\n";
    out += handle_skill_block(block);
  }
  return out;
}

}  // namespace skillcraft
