#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "skillcraft/experience_pool.hpp"
#include "support.hpp"

using namespace skillcraft;
using testsupport::make_pool;
using testsupport::make_trajectory;
using testsupport::thrown_kind;

namespace {

std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("task-" + std::to_string(i));
  return out;
}

}  // namespace

TEST_CASE("round_half_up") {
  CHECK(round_half_up(5.5) == 6);
  CHECK(round_half_up(0.5 * 11) == 6);
  CHECK(round_half_up(5.49) == 5);
  CHECK(round_half_up(0.0) == 0);
}

TEST_CASE("split of 10 tasks at 0.5 is 5/5 and reproducible") {
  const auto a = split_tasks(ids(10), {0.5, 7});
  const auto b = split_tasks(ids(10), {0.5, 7});
  CHECK(a.train.size() == 5);
  CHECK(a.test.size() == 5);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
}

TEST_CASE("split of 11 tasks rounds the train half up") {
  const auto s = split_tasks(ids(11), {0.5, 3});
  CHECK(s.train.size() == 6);
  CHECK(s.test.size() == 5);
}

TEST_CASE("different seeds give different partitions") {
  // 20 tasks: C(20,10) = 184756 partitions, so 100 seeds should collide rarely.
  std::set<std::vector<std::string>> distinct;
  for (std::uint64_t seed = 0; seed < 100; ++seed) distinct.insert(split_tasks(ids(20), {0.5, seed}).train);
  CHECK(distinct.size() >= 95);
}

TEST_CASE("property: split is a partition that keeps input order") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 40;
    const double fraction = static_cast<double>(rng() % 101) / 100.0;
    const auto input = ids(n);
    const auto s = split_tasks(input, {fraction, rng()});
    CHECK(s.train.size() == round_half_up(fraction * static_cast<double>(n)));
    std::vector<std::string> both = s.train;
    both.insert(both.end(), s.test.begin(), s.test.end());
    std::sort(both.begin(), both.end());
    auto sorted_input = input;
    std::sort(sorted_input.begin(), sorted_input.end());
    CHECK(both == sorted_input);
    for (const auto* half : {&s.train, &s.test})
      CHECK(std::is_sorted(half->begin(), half->end(), [&](const auto& x, const auto& y) {
        return std::find(input.begin(), input.end(), x) < std::find(input.begin(), input.end(), y);
      }));
  }
}

TEST_CASE("sample_by_success_ratio on a 40/40 pool") {
  const auto pool = make_pool(40, 40);
  const auto sub = sample_by_success_ratio(pool, 0.75, 40, 1);
  CHECK(sub.success_count() == 30);
  CHECK(sub.failure_count() == 10);

  const auto none = sample_by_success_ratio(pool, 0.0, 40, 1);
  CHECK(none.success_count() == 0);
  CHECK(none.failure_count() == 40);
}

TEST_CASE("sampling more successes than available fails") {
  const auto pool = make_pool(10, 40);
  try {
    sample_by_success_ratio(pool, 1.0, 20, 0);
    FAIL("expected InsufficientTrajectories");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InsufficientTrajectories);
    CHECK(e.detail() == "success");
  }
}

TEST_CASE("property: sampled success fraction is exact and order-preserving") {
  const auto pool = make_pool(30, 30);
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t size = 1 + rng() % 30;
    const double ratio = static_cast<double>(rng() % 5) / 4.0;
    const auto sub = sample_by_success_ratio(pool, ratio, size, rng());
    CHECK(sub.size() == size);
    CHECK(sub.success_count() == round_half_up(ratio * static_cast<double>(size)));
    std::vector<std::size_t> positions;
    for (const auto& t : sub.trajectories())
      positions.push_back(static_cast<std::size_t>(
          std::find(pool.trajectories().begin(), pool.trajectories().end(), t) - pool.trajectories().begin()));
    CHECK(std::is_sorted(positions.begin(), positions.end()));
  }
}

TEST_CASE("pool validation") {
  auto a = make_trajectory("dup", true);
  auto b = make_trajectory("dup", false);
  CHECK(thrown_kind([&] { ExperiencePool({a, b}); }) == ErrorKind::Parse);
  auto c = make_trajectory("other-domain", true, "webshop");
  CHECK(thrown_kind([&] { ExperiencePool({a, c}); }) == ErrorKind::Parse);
  auto d = make_trajectory("no-steps", true);
  d.steps.clear();
  CHECK(thrown_kind([&] { ExperiencePool({d}); }) == ErrorKind::Parse);
}

TEST_CASE("render a one-step trajectory with only an action") {
  Trajectory t = make_trajectory("one", true);
  t.steps = {{std::nullopt, "open fridge", std::nullopt}};
  CHECK(render_trajectory(t) == "Task: task for one\nOutcome: success\nReward: 1\n\n[action] open fridge\n");
}

TEST_CASE("render appends the final answer and is deterministic") {
  Trajectory t = make_trajectory("fa", false);
  t.final_answer = "42";
  const auto text = render_trajectory(t);
  CHECK(text.ends_with("\nFinal answer: 42\n"));
  CHECK(text == render_trajectory(t));
  CHECK(text.find("Outcome: failure") != std::string::npos);
}

TEST_CASE("render preserves step order") {
  Trajectory t = make_trajectory("order", true);
  t.steps.clear();
  for (int i = 0; i < 12; ++i) t.steps.push_back({std::nullopt, "act-" + std::to_string(i), std::nullopt});
  const auto text = render_trajectory(t);
  std::size_t last = 0;
  for (int i = 0; i < 12; ++i) {
    const auto pos = text.find("[action] act-" + std::to_string(i) + "\n");
    REQUIRE(pos != std::string::npos);
    CHECK(pos >= last);
    last = pos;
  }
}

TEST_CASE("render elides middle steps beyond the cap") {
  Trajectory t = make_trajectory("long", true);
  t.steps.clear();
  for (int i = 0; i < 200; ++i)
    t.steps.push_back({std::string(50, 't'), "act-" + std::to_string(i), std::string(50, 'o')});
  const auto text = render_trajectory(t, 2000);
  CHECK(text.size() <= 2000);
  CHECK(text.find("[action] act-0\n") != std::string::npos);
  CHECK(text.find("[action] act-199\n") != std::string::npos);
  CHECK(text.find("steps elided ...]") != std::string::npos);
  CHECK(text.find("[action] act-100\n") == std::string::npos);
}

TEST_CASE("trajectories round-trip through JSON Lines") {
  std::vector<Trajectory> ts{make_trajectory("a", true), make_trajectory("b", false)};
  ts[1].final_answer = "done";
  std::stringstream buf;
  write_trajectories_jsonl(buf, ts);
  CHECK(read_trajectories_jsonl(buf) == ts);
}
