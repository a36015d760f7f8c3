#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "skillcraft/injection.hpp"
#include "support.hpp"

using namespace skillcraft;
using testsupport::make_skill;
using testsupport::thrown_kind;

namespace {

std::string fixture(const std::string& name) {
  std::ifstream in(std::string(SKILLCRAFT_FIXTURE_DIR) + "/" + name, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SkillStore sealed_store(std::vector<Skill> skills) {
  SkillStore store(SkillBudget{10, 3000, std::nullopt});
  for (auto& s : skills) store.create(s);
  store.seal();
  return store;
}

}  // namespace

TEST_CASE("single-skill section matches the pinned template") {
  const auto skills = skills_from_json(nlohmann::json::parse(fixture("single_skill.json")));
  CHECK(render_single(skills.at(0)) == fixture("single_skill_expected.md"));
}

TEST_CASE("optional file headings appear only when files exist") {
  Skill s = make_skill("bare");
  const auto bare = render_single(s);
  CHECK(bare.find("Reference Files") == std::string::npos);
  CHECK(bare.find("Script Files") == std::string::npos);

  s.references["helper.txt"] = "use me";
  const auto with_ref = render_single(s);
  CHECK(with_ref.find("\n\n#### Reference Files\nhelper.txt: use me\n\n**Note:**") != std::string::npos);
  CHECK(with_ref.find("Script Files") == std::string::npos);
  CHECK(with_ref == render_single(s));
}

TEST_CASE("single-skill rendering round-trips") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    Skill s = make_skill("round-trip-" + std::to_string(i), 1 + rng() % 200);
    s.body = "Intro line\n\n- step " + std::to_string(i) + "\n" + s.body;
    if (i % 2) s.references["r.md"] = "ref";
    if (i % 3 == 0) s.scripts["s.py"] = "print(1)";
    const auto back = parse_single(render_single(s));
    CHECK(back.name == s.name);
    CHECK(back.description == s.description);
    CHECK(back.body == s.body);
  }
}

TEST_CASE("multi-skill preamble matches the pinned template") {
  const auto store = sealed_store(skills_from_json(nlohmann::json::parse(fixture("two_skills.json"))));
  const auto text = render_multi_preamble(store);
  CHECK(text == fixture("multi_preamble_expected.md"));
  for (const char* tool : {"`list_skills`", "`view_skill <skill_name>`", "`read_skill_file <skill_name> <filename>`"})
    CHECK(text.find(tool) != std::string::npos);
  CHECK(text == render_multi_preamble(store));
}

TEST_CASE("multi preamble requires a sealed non-empty store") {
  SkillStore open(SkillBudget{3, 3000, std::nullopt});
  open.create(make_skill("a"));
  CHECK(thrown_kind([&] { render_multi_preamble(open); }) == ErrorKind::InvalidArgument);
  SkillStore empty;
  empty.seal();
  CHECK(thrown_kind([&] { render_multi_preamble(empty); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("mode choice") {
  CHECK(choose_mode(sealed_store({make_skill("one")})) == InjectionMode::SingleInline);
  CHECK(choose_mode(sealed_store({make_skill("one"), make_skill("two")})) == InjectionMode::MultiTool);
}

TEST_CASE("skill tool responses") {
  Skill s = make_skill("s");
  s.references["helper.txt"] = "line 1\nline 2";
  const auto store = sealed_store({s});
  DisclosureSession session(store);

  CHECK(session.handle_skill_block("list_skills") == "s — " + s.description + "\n");
  CHECK(session.handle_skill_block("view_skill s") == s.body + "\n\nAttached files: helper.txt");
  CHECK(session.handle_skill_block("read_skill_file s helper.txt") == "line 1\nline 2");

  const auto missing = session.handle_skill_block("view_skill missing-name");
  CHECK(missing.starts_with("Error:"));
  CHECK(missing.find("Available skills: s") != std::string::npos);
  CHECK(session.handle_skill_block("read_skill_file s nope.txt").starts_with("Error:"));
  CHECK(session.handle_skill_block("delete_skill s").starts_with("Error:"));
  CHECK(session.transcript().size() == 6);
}

TEST_CASE("a reply mixing skill and python blocks gets a protocol reminder") {
  const auto store = sealed_store({make_skill("s")});
  DisclosureSession session(store);
  const auto reply = session.handle_model_reply("```skill\nlist_skills\n```\n```python\nprint(1)\n```");
  CHECK(reply.find("EITHER") != std::string::npos);
  CHECK(session.handle_model_reply("```python\nprint(1)\n```").empty());
  CHECK(session.handle_model_reply("Let me look.\n```skill\nlist_skills\n```") == "s — " + make_skill("s").description + "\n");
}

TEST_CASE("property: disclosure never changes the store and answers are pure") {
  Skill a = make_skill("alpha");
  a.scripts["run.py"] = "print('a')";
  const auto store = sealed_store({a, make_skill("beta")});
  const auto before = store.digest();
  const std::vector<std::string> blocks{"list_skills", "view_skill alpha", "view_skill beta", "view_skill gamma",
                                        "read_skill_file alpha run.py", "read_skill_file beta x", "", "bogus"};
  DisclosureSession first(store), second(store);
  std::mt19937_64 rng(17);
  for (int i = 0; i < 200; ++i) {
    const auto& b = blocks[rng() % blocks.size()];
    CHECK(first.handle_skill_block(b) == second.handle_skill_block(b));
  }
  CHECK(store.digest() == before);
}

TEST_CASE("fenced block extraction") {
  const auto blocks = fenced_blocks("a\n```skill\n view_skill x \n```\ntext\n```skill\nlist_skills\n```", "skill");
  REQUIRE(blocks.size() == 2);
  CHECK(blocks[0] == "view_skill x");
  CHECK(blocks[1] == "list_skills");
}
