#include <doctest.h>

#include <memory>
#include <set>

#include "skillcraft/extraction.hpp"
#include "skillcraft/prompts.hpp"
#include "support.hpp"

using namespace skillcraft;
using nlohmann::json;
using testsupport::make_pool;
using testsupport::make_trajectory;
using testsupport::thrown_kind;

namespace {

Gateway scripted(std::vector<ScriptEntry> entries, std::shared_ptr<ScriptedProvider>* handle = nullptr) {
  auto p = std::make_shared<ScriptedProvider>(std::move(entries));
  if (handle) *handle = p;
  return Gateway(p, RetryPolicy{}, [](std::chrono::milliseconds) {});
}

Gateway from_script_json(const json& script, std::shared_ptr<ScriptedProvider>* handle = nullptr) {
  return scripted(script_from_json(script), handle);
}

json patterns(std::size_t n, const char* type = "success") {
  json arr = json::array();
  for (std::size_t i = 0; i < n; ++i)
    arr.push_back({{"type", type}, {"pattern", "p" + std::to_string(i)}, {"description", "d" + std::to_string(i)}});
  return arr;
}

PatternSet set_of(PatternKind kind, const std::string& id) {
  return PatternSet{{{kind, "t-" + id, "d-" + id}}, "", {id}};
}

ExtractionConfig sequential() {
  ExtractionConfig cfg;
  cfg.concurrency = 1;
  return cfg;
}

}  // namespace

TEST_CASE("analysis keeps well-formed patterns") {
  auto gw = scripted({ScriptEntry::reply(json{{"patterns", patterns(2)}}.dump())});
  const auto set = analyze_trajectory(make_trajectory("a", true), sequential(), gw);
  CHECK(set.patterns.size() == 2);
  CHECK(set.source == std::vector<std::string>{"a"});
}

TEST_CASE("analysis truncates to K patterns") {
  auto gw = scripted({ScriptEntry::reply(patterns(5).dump())});
  const auto set = analyze_trajectory(make_trajectory("a", true), sequential(), gw);
  REQUIRE(set.patterns.size() == 3);
  CHECK(set.patterns[2].title == "p2");
}

TEST_CASE("an empty analysis list is not an error") {
  auto gw = scripted({ScriptEntry::reply("[]")});
  CHECK(analyze_trajectory(make_trajectory("a", false), sequential(), gw).patterns.empty());
}

TEST_CASE("pattern polarity follows the trajectory outcome") {
  auto gw = scripted({ScriptEntry::reply(patterns(2, "success").dump())});
  const auto set = analyze_trajectory(make_trajectory("f", false), sequential(), gw);
  CHECK(set.count(PatternKind::Failure) == 2);
  CHECK(set.count(PatternKind::Success) == 0);
}

TEST_CASE("analysis prompt carries the rendered trajectory") {
  std::shared_ptr<ScriptedProvider> p;
  auto gw = scripted({ScriptEntry::reply("[]")}, &p);
  const auto t = make_trajectory("seen", true);
  analyze_trajectory(t, sequential(), gw);
  CHECK(p->recorded()[0].messages[0].content == render_trajectory(t));
  CHECK(p->recorded()[0].system.find("success patterns") != std::string::npos);
}

TEST_CASE("malformed JSON gets exactly one re-ask") {
  SUBCASE("recovers on the second reply") {
    std::shared_ptr<ScriptedProvider> p;
    auto gw = scripted({ScriptEntry::reply("not json"), ScriptEntry::reply(patterns(1).dump())}, &p);
    CHECK(analyze_trajectory(make_trajectory("a", true), sequential(), gw).patterns.size() == 1);
    REQUIRE(p->calls() == 2);
    const auto& retry = p->recorded()[1].messages;
    CHECK(retry.size() == 3);
    CHECK(retry[1].content == "not json");
    CHECK(retry[2].content.find("could not be parsed") != std::string::npos);
  }
  SUBCASE("two failures raise MalformedModelOutput with the raw text") {
    auto gw = scripted({ScriptEntry::reply("nope"), ScriptEntry::reply("still nope"), ScriptEntry::reply("[]")});
    try {
      analyze_trajectory(make_trajectory("a", true), sequential(), gw);
      FAIL("expected MalformedModelOutput");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::MalformedModelOutput);
      CHECK(e.detail() == "still nope");
    }
  }
}

TEST_CASE("consolidate a single set makes no call") {
  std::shared_ptr<ScriptedProvider> p;
  auto gw = scripted({}, &p);
  const auto r = consolidate({set_of(PatternKind::Success, "x")}, sequential(), gw);
  CHECK(r.trace.total_calls() == 0);
  CHECK(r.trace.levels() == 0);
  CHECK(r.merged == set_of(PatternKind::Success, "x"));
}

namespace {

ConsolidationResult run_tree(std::size_t n, std::size_t G, std::vector<std::size_t>* group_sizes = nullptr) {
  auto provider = std::make_shared<CallbackProvider>([group_sizes](const ChatRequest& req) {
    if (group_sizes) {
      const auto& text = req.messages[0].content;
      const auto open = text.find('(');
      group_sizes->push_back(std::stoul(text.substr(open + 1)));
    }
    return ChatResponse{testsupport::merge_reply(true, false).dump(), {}, "stop"};
  });
  Gateway gw(provider);
  ExtractionConfig cfg = sequential();
  cfg.group_size = G;
  std::vector<PatternSet> sets;
  for (std::size_t i = 0; i < n; ++i) sets.push_back(set_of(PatternKind::Success, std::to_string(i)));
  return consolidate(sets, cfg, gw);
}

}  // namespace

TEST_CASE("100 sets at G=10 merge in 2 levels with 11 calls") {
  const auto r = run_tree(100, 10);
  CHECK(r.trace.level_sizes == std::vector<std::size_t>{100, 10, 1});
  CHECK(r.trace.merge_calls == std::vector<std::size_t>{10, 1});
  CHECK(r.trace.total_calls() == 11);
}

TEST_CASE("25 sets at G=10: 25 -> 3 -> 1 with a 5-member remainder group") {
  std::vector<std::size_t> groups;
  const auto r = run_tree(25, 10, &groups);
  CHECK(r.trace.level_sizes == std::vector<std::size_t>{25, 3, 1});
  CHECK(r.trace.total_calls() == 4);
  CHECK(groups == std::vector<std::size_t>{10, 10, 5, 3});
}

TEST_CASE("a trailing single-member group passes through without a call") {
  const auto r = run_tree(21, 10);
  CHECK(r.trace.level_sizes == std::vector<std::size_t>{21, 3, 1});
  CHECK(r.trace.merge_calls == std::vector<std::size_t>{2, 1});
}

TEST_CASE("merged sources cover every input in pool order") {
  const auto r = run_tree(12, 5);
  std::vector<std::string> expected;
  for (int i = 0; i < 12; ++i) expected.push_back(std::to_string(i));
  CHECK(r.merged.source == expected);
}

TEST_CASE("a merge that invents a pattern kind is re-asked") {
  const json converting{{"success_patterns", patterns(1)}, {"failure_patterns", patterns(1, "failure")}};
  const json faithful{{"success_patterns", patterns(1)}, {"failure_patterns", json::array()}};
  std::shared_ptr<ScriptedProvider> p;
  auto gw = scripted({ScriptEntry::reply(converting.dump()), ScriptEntry::reply(faithful.dump())}, &p);
  const auto merged = merge_pattern_sets({set_of(PatternKind::Success, "a"), set_of(PatternKind::Success, "b")},
                                         sequential(), gw);
  CHECK(p->calls() == 2);
  CHECK(merged.count(PatternKind::Failure) == 0);
  CHECK(merged.count(PatternKind::Success) == 1);
}

TEST_CASE("pattern kinds survive consolidation when the merger echoes its inputs") {
  auto provider = std::make_shared<CallbackProvider>([](const ChatRequest& req) {
    // Echo: copy every input pattern into the bucket of its kind.
    json out{{"success_patterns", json::array()}, {"failure_patterns", json::array()}};
    const auto& text = req.messages[0].content;
    std::size_t pos = 0;
    while ((pos = text.find("\n{", pos)) != std::string::npos) {
      const auto end = text.find("\n}", pos);
      const json doc = json::parse(text.substr(pos + 1, end - pos + 1));
      for (const char* key : {"success_patterns", "failure_patterns"})
        for (const auto& pt : doc[key]) out[key].push_back(pt);
      pos = end;
    }
    return ChatResponse{out.dump(), {}, "stop"};
  });
  Gateway gw(provider);
  ExtractionConfig cfg = sequential();
  cfg.group_size = 3;
  std::vector<PatternSet> sets;
  for (int i = 0; i < 10; ++i)
    sets.push_back(set_of(i % 3 == 0 ? PatternKind::Failure : PatternKind::Success, std::to_string(i)));
  const auto r = consolidate(sets, cfg, gw);
  CHECK(r.merged.count(PatternKind::Failure) == 4);
  CHECK(r.merged.count(PatternKind::Success) == 6);
  for (const auto& pt : r.merged.patterns) {
    const int id = std::stoi(pt.title.substr(2));
    CHECK((pt.kind == PatternKind::Failure) == (id % 3 == 0));
  }
}

TEST_CASE("synthesis: one create then finish") {
  const json script = json::parse(R"([
    {"tool_calls": [{"name": "create_skill", "arguments": {"name": "s", "description": "d", "body": "b"}}]},
    {"tool_calls": [{"name": "finish", "arguments": {}}]}
  ])");
  auto gw = from_script_json(script);
  const auto r = synthesize_skills(PatternSet{}, sequential(), gw);
  CHECK(r.store.sealed());
  CHECK(r.store.size() == 1);
  CHECK(r.turns == 2);
}

TEST_CASE("synthesis: an over-budget create is answered in-band and corrected") {
  json script = json::array();
  script.push_back({{"tool_calls",
                     {{{"name", "create_skill"},
                       {"arguments", {{"name", "s"}, {"description", "d"}, {"body", std::string(3001, 'b')}}}}}}});
  script.push_back({{"tool_calls",
                     {{{"name", "create_skill"},
                       {"arguments", {{"name", "s"}, {"description", "d"}, {"body", std::string(2000, 'b')}}}}}}});
  script.push_back({{"tool_calls", {{{"name", "finish"}, {"arguments", json::object()}}}}});
  std::shared_ptr<ScriptedProvider> p;
  auto gw = from_script_json(script, &p);
  const auto r = synthesize_skills(PatternSet{}, sequential(), gw);
  CHECK(r.store.size() == 1);
  CHECK(r.tool_log[0].find("Error (BudgetExceeded)") != std::string::npos);
  const auto second = p->recorded()[1].messages;
  CHECK(second.back().role == "tool");
  CHECK(second.back().content.find("BudgetExceeded") != std::string::npos);
}

TEST_CASE("synthesis: plain text for every turn stalls") {
  auto provider = std::make_shared<CallbackProvider>(
      [](const ChatRequest&) { return ChatResponse{"Here is my skill in prose.", {}, "stop"}; });
  Gateway gw(provider);
  CHECK(thrown_kind([&] { synthesize_skills(PatternSet{}, sequential(), gw); }) == ErrorKind::SynthesisStalled);
  CHECK(provider->calls() == 20);
}

TEST_CASE("synthesis: schema-invalid arguments and early finish are reported to the model") {
  const json script = json::parse(R"([
    {"tool_calls": [{"name": "finish", "arguments": {}}]},
    {"tool_calls": [{"name": "create_skill", "arguments": {"name": "s"}}]},
    {"tool_calls": [{"name": "create_skill", "arguments": {"name": "s", "description": "d", "body": "b"}},
                    {"name": "finish", "arguments": {}}]}
  ])");
  auto gw = from_script_json(script);
  const auto r = synthesize_skills(PatternSet{}, sequential(), gw);
  CHECK(r.tool_log[0].find("no skills have been created") != std::string::npos);
  CHECK(r.tool_log[1].find("SchemaViolation") != std::string::npos);
  CHECK(r.store.size() == 1);
}

TEST_CASE("extract on a 3-trajectory pool is deterministic") {
  const auto pool = make_pool(2, 1);
  std::vector<std::uint64_t> digests;
  for (int run = 0; run < 2; ++run) {
    auto gw = from_script_json(testsupport::extraction_script(pool, {{}}));
    ExtractionConfig cfg;  // default concurrency: analysis runs in parallel
    const auto r = extract(pool, cfg, gw);
    CHECK(r.store.size() == 1);
    CHECK(r.analysis_calls == 3);
    CHECK(r.merge.levels() == 1);
    digests.push_back(r.store.digest());
  }
  CHECK(digests[0] == digests[1]);
}

TEST_CASE("guidance reaches every extractor system prompt verbatim") {
  const auto pool = make_pool(2, 1);
  std::shared_ptr<ScriptedProvider> p;
  auto gw = from_script_json(testsupport::extraction_script(pool, {{}}), &p);
  ExtractionConfig cfg = sequential();
  cfg.guidance = "## Extraction Quality Guidance\n\n### Actionable Specificity\nName the exact tool.\n";
  extract(pool, cfg, gw);
  std::size_t with_guidance = 0;
  for (const auto& req : p->recorded()) {
    if (req.system.find("analyse a single agent trajectory") != std::string::npos ||
        req.system.find("synthesise them into skills") != std::string::npos) {
      CHECK(req.system.find(*cfg.guidance) != std::string::npos);
      ++with_guidance;
    }
  }
  CHECK(with_guidance == 5);  // 3 analysis calls + 2 synthesis turns
}

TEST_CASE("extract on 20 trajectories makes 20 analysis and 3 merge calls") {
  const auto pool = make_pool(12, 8);
  std::shared_ptr<ScriptedProvider> p;
  // Level 1 groups: s0..s9 (successes only) and s10, s11, f0..f7; then the root merge.
  const std::vector<testsupport::MergeRoute> merges{
      {testsupport::pattern_marker("s0"), true, false}, {testsupport::pattern_marker("f0")}, {}};
  auto gw = from_script_json(testsupport::extraction_script(pool, merges), &p);
  const auto r = extract(pool, ExtractionConfig{}, gw);
  CHECK(r.analysis_calls == 20);
  CHECK(r.merge.level_sizes == std::vector<std::size_t>{20, 2, 1});
  CHECK(r.merge.total_calls() == 3);
  CHECK(p->remaining() == 0);
  for (const auto& s : r.store.skills()) CHECK(validate_skill(s, r.store.budget()).ok());
}

TEST_CASE("rewrite_format") {
  const Skill skill{"fmt", "Formatting test.", "Step one. Step two.", {}, {}};
  SUBCASE("approved rewrite") {
    auto gw = scripted({ScriptEntry::reply("```\n1. Step one.\n2. Step two.\n```"),
                        ScriptEntry::reply(R"({"approved": true, "reason": "same content"})")});
    const auto out = rewrite_format(skill, prompts::BodyFormat::OrderedList, gw, {});
    CHECK(out.body == "1. Step one.\n2. Step two.");
    CHECK(out.name == skill.name);
  }
  SUBCASE("two rejections fail") {
    auto gw = scripted({ScriptEntry::reply("x"), ScriptEntry::reply(R"({"approved": false, "reason": "lost a step"})"),
                        ScriptEntry::reply("y"), ScriptEntry::reply(R"({"approved": false, "reason": "again"})")});
    CHECK(thrown_kind([&] { rewrite_format(skill, prompts::BodyFormat::Prose, gw, {}); }) ==
          ErrorKind::FormatRewriteFailed);
  }
  SUBCASE("all four formats keep name and description") {
    std::set<std::string> bodies;
    for (auto f : {prompts::BodyFormat::OrderedList, prompts::BodyFormat::UnorderedList,
                   prompts::BodyFormat::Checklist, prompts::BodyFormat::Prose}) {
      auto gw = scripted({ScriptEntry::reply("body as " + std::string(prompts::format_name(f))),
                          ScriptEntry::reply(R"({"approved": true})")});
      const auto out = rewrite_format(skill, f, gw, {});
      CHECK(out.name == skill.name);
      CHECK(out.description == skill.description);
      bodies.insert(out.body);
    }
    CHECK(bodies.size() == 4);
  }
}
