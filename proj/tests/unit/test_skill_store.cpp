#include <doctest.h>

#include <random>

#include "skillcraft/skill_store.hpp"
#include "support.hpp"

using namespace skillcraft;
using testsupport::make_skill;
using testsupport::thrown_kind;

TEST_CASE("validate_skill accepts a slug name with a 2900-char body") {
  const auto v = validate_skill(make_skill("spreadsheet-formula-safety", 2900), SkillBudget{});
  CHECK(v.ok());
}

TEST_CASE("validate_skill rejects names outside the slug alphabet") {
  const auto v = validate_skill(make_skill("Spreadsheet Skills!"), SkillBudget{});
  REQUIRE_FALSE(v.ok());
  CHECK(v.has(Violation::Category::Schema));
  CHECK(v.violations.front().field == "name");
}

TEST_CASE("validate_skill flags a 3001-char body against the default budget") {
  const auto v = validate_skill(make_skill("long-body", 3001), SkillBudget{});
  REQUIRE(v.violations.size() == 1);
  CHECK(v.violations[0].field == "body");
  CHECK(v.has(Violation::Category::Budget));
}

TEST_CASE("body length is counted in code points") {
  Skill s = make_skill("unicode-body", 0);
  for (int i = 0; i < 3000; ++i) s.body += "\xC3\xA9";  // é, two bytes each
  CHECK(char_count(s.body) == 3000);
  CHECK(validate_skill(s, SkillBudget{}).ok());
  s.body += "\xC3\xA9";
  CHECK_FALSE(validate_skill(s, SkillBudget{}).ok());
}

TEST_CASE("slug edge cases") {
  CHECK(is_valid_slug("a"));
  CHECK(is_valid_slug(std::string(64, 'a')));
  CHECK_FALSE(is_valid_slug(std::string(65, 'a')));
  CHECK_FALSE(is_valid_slug(""));
  CHECK_FALSE(is_valid_slug("under_score"));
}

TEST_CASE("description must be non-empty, single-line and at most 400 characters") {
  Skill s = make_skill("desc-check");
  s.description = "";
  CHECK(validate_skill(s, SkillBudget{}).has(Violation::Category::Schema));
  s.description = "line one\nline two";
  CHECK(validate_skill(s, SkillBudget{}).has(Violation::Category::Schema));
  s.description = std::string(400, 'd');
  CHECK(validate_skill(s, SkillBudget{}).ok());
  s.description = std::string(401, 'd');
  CHECK(validate_skill(s, SkillBudget{}).has(Violation::Category::Budget));
}

TEST_CASE("attached files are capped at 16 KiB each and excluded from the body budget") {
  Skill s = make_skill("with-files", 3000);
  s.references["big.md"] = std::string(16 * 1024, 'r');
  CHECK(validate_skill(s, SkillBudget{}).ok());
  s.scripts["huge.py"] = std::string(16 * 1024 + 1, 's');
  CHECK_FALSE(validate_skill(s, SkillBudget{}).ok());
}

TEST_CASE("create into an empty store") {
  SkillStore store;
  store.create(make_skill("first"));
  CHECK(store.size() == 1);
  CHECK(store.find("first") != nullptr);
}

TEST_CASE("max_skills = 1 rejects a second skill") {
  SkillStore store;
  store.create(make_skill("first"));
  CHECK(thrown_kind([&] { store.create(make_skill("second")); }) == ErrorKind::BudgetExceeded);
  CHECK(store.size() == 1);
}

TEST_CASE("duplicate names are rejected") {
  SkillStore store(SkillBudget{3, 3000, std::nullopt});
  store.create(make_skill("same"));
  CHECK(thrown_kind([&] { store.create(make_skill("same")); }) == ErrorKind::DuplicateName);
}

TEST_CASE("schema violations raise SchemaViolation, length violations BudgetExceeded") {
  SkillStore store;
  CHECK(thrown_kind([&] { store.create(make_skill("Bad Name")); }) == ErrorKind::SchemaViolation);
  try {
    store.create(make_skill("too-long", 3001));
    FAIL("expected BudgetExceeded");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::BudgetExceeded);
    CHECK(std::string(e.what()).find("3001") != std::string::npos);
  }
  CHECK(store.empty());
}

TEST_CASE("update and delete") {
  SkillStore store;
  store.create(make_skill("only"));

  SUBCASE("update body to 100 chars") {
    store.update("only", make_skill("only", 100));
    CHECK(char_count(store.find("only")->body) == 100);
  }
  SUBCASE("update to a 3001-char body leaves the store unchanged") {
    const auto before = store.digest();
    const Skill candidate = make_skill("only", 3001);
    CHECK_FALSE(validate_skill(candidate, store.budget()).ok());
    CHECK(thrown_kind([&] { store.update("only", candidate); }) == ErrorKind::BudgetExceeded);
    CHECK(store.digest() == before);
  }
  SUBCASE("rename through update") {
    store.update("only", make_skill("renamed"));
    CHECK(store.find("only") == nullptr);
    CHECK(store.find("renamed") != nullptr);
  }
  SUBCASE("delete the only skill") {
    store.remove("only");
    CHECK(store.empty());
  }
  SUBCASE("unknown names") {
    CHECK(thrown_kind([&] { store.remove("ghost"); }) == ErrorKind::NotFound);
    CHECK(thrown_kind([&] { store.update("ghost", make_skill("ghost")); }) == ErrorKind::NotFound);
  }
}

TEST_CASE("max_total_chars bounds the sum of body lengths") {
  SkillStore store(SkillBudget{5, 3000, 100});
  store.create(make_skill("a", 60));
  CHECK(thrown_kind([&] { store.create(make_skill("b", 41)); }) == ErrorKind::BudgetExceeded);
  store.create(make_skill("b", 40));
  CHECK(store.total_body_chars() == 100);
}

TEST_CASE("seal") {
  SkillStore store;
  store.seal();
  CHECK(store.sealed());
  CHECK(store.empty());
  store.seal();
  CHECK(store.sealed());
  CHECK(thrown_kind([&] { store.create(make_skill("late")); }) == ErrorKind::StoreSealed);
}

TEST_CASE("create then delete is identity") {
  SkillStore store(SkillBudget{3, 3000, std::nullopt});
  store.create(make_skill("keep"));
  const auto before = store.digest();
  store.create(make_skill("temp"));
  store.remove("temp");
  CHECK(store.digest() == before);
}

TEST_CASE("property: validate ok iff create into a fresh store succeeds") {
  std::mt19937_64 rng(11);
  const std::vector<std::string> names{"ok-name", "Bad", "", std::string(65, 'z'), "a-1", "x_y"};
  for (int i = 0; i < 300; ++i) {
    Skill s = make_skill(names[rng() % names.size()], rng() % 3200);
    if (rng() % 5 == 0) s.description.clear();
    const bool valid = validate_skill(s, SkillBudget{}).ok();
    SkillStore fresh;
    const bool created = !thrown_kind([&] { fresh.create(s); }).has_value();
    CHECK(valid == created);
  }
}

TEST_CASE("skills round-trip through JSON in insertion order") {
  Skill a = make_skill("zeta");
  a.references["b.md"] = "B";
  a.references["a.md"] = "A";
  Skill b = make_skill("alpha");
  const auto back = skills_from_json(skills_to_json({a, b}));
  REQUIRE(back.size() == 2);
  CHECK(back[0] == a);
  CHECK(back[1] == b);
}
