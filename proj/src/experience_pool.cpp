#include "skillcraft/experience_pool.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "skillcraft/error.hpp"
#include "skillcraft/rng.hpp"

namespace skillcraft {

using nlohmann::json;

ExperiencePool::ExperiencePool(std::vector<Trajectory> trajectories)
    : trajectories_(std::move(trajectories)) {
  std::set<std::string> ids;
  for (const auto& t : trajectories_) {
    if (t.id.empty()) throw Error(ErrorKind::Parse, "trajectory id must not be empty");
    if (!ids.insert(t.id).second)
      throw Error(ErrorKind::Parse, "duplicate trajectory id '" + t.id + "'");
    if (t.steps.empty())
      throw Error(ErrorKind::Parse, "trajectory '" + t.id + "' has no steps");
    for (const auto& s : t.steps)
      if (s.action.empty())
        throw Error(ErrorKind::Parse, "trajectory '" + t.id + "' has a step with an empty action");
  }
  if (!trajectories_.empty()) {
    domain_ = trajectories_.front().domain;
    target_model_ = trajectories_.front().target_model;
    for (const auto& t : trajectories_) {
      if (t.domain != domain_ || t.target_model != target_model_)
        throw Error(ErrorKind::Parse, "trajectory '" + t.id + "' belongs to (" + t.domain + ", " +
                                          t.target_model + "), pool is (" + domain_ + ", " +
                                          target_model_ + ")");
    }
  }
}

std::size_t ExperiencePool::success_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(trajectories_.begin(), trajectories_.end(),
                                                [](const Trajectory& t) { return t.outcome; }));
}

std::size_t round_half_up(double x) {
  if (!(x >= 0.0)) return 0;
  return static_cast<std::size_t>(std::floor(x + 0.5 + 1e-9));
}

TaskSplit split_tasks(const std::vector<std::string>& task_ids, const SplitSpec& spec) {
  if (task_ids.empty()) throw Error(ErrorKind::EmptyInput, "split_tasks: no task ids");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    throw Error(ErrorKind::InvalidArgument, "train_fraction must lie in (0, 1)");

  const std::size_t n = task_ids.size();
  const std::size_t n_train = std::min(n, round_half_up(spec.train_fraction * double(n)));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(spec.seed);
  fisher_yates(order, rng);

  std::vector<bool> in_train(n, false);
  for (std::size_t i = 0; i < n_train; ++i) in_train[order[i]] = true;

  TaskSplit split;
  split.train.reserve(n_train);
  split.test.reserve(n - n_train);
  for (std::size_t i = 0; i < n; ++i) (in_train[i] ? split.train : split.test).push_back(task_ids[i]);
  return split;
}

ExperiencePool sample_by_success_ratio(const ExperiencePool& pool, double ratio, std::size_t size,
                                       std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0))
    throw Error(ErrorKind::InvalidArgument, "success ratio must lie in [0, 1]");
  if (size == 0) throw Error(ErrorKind::InvalidArgument, "sample size must be positive");

  const std::size_t want_success = std::min(size, round_half_up(ratio * double(size)));
  const std::size_t want_failure = size - want_success;

  std::vector<std::size_t> successes, failures;
  const auto& all = pool.trajectories();
  for (std::size_t i = 0; i < all.size(); ++i) (all[i].outcome ? successes : failures).push_back(i);

  if (successes.size() < want_success)
    throw Error(ErrorKind::InsufficientTrajectories,
                "need " + std::to_string(want_success) + " successful trajectories, pool has " +
                    std::to_string(successes.size()),
                "success");
  if (failures.size() < want_failure)
    throw Error(ErrorKind::InsufficientTrajectories,
                "need " + std::to_string(want_failure) + " failed trajectories, pool has " +
                    std::to_string(failures.size()),
                "failure");

  std::mt19937_64 rng(seed);
  fisher_yates(successes, rng);
  fisher_yates(failures, rng);
  successes.resize(want_success);
  failures.resize(want_failure);

  std::vector<std::size_t> chosen;
  chosen.reserve(size);
  chosen.insert(chosen.end(), successes.begin(), successes.end());
  chosen.insert(chosen.end(), failures.begin(), failures.end());
  std::sort(chosen.begin(), chosen.end());

  std::vector<Trajectory> out;
  out.reserve(size);
  for (auto i : chosen) out.push_back(all[i]);
  return ExperiencePool(std::move(out));
}

namespace {

std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) return std::to_string(v);
  return std::string(buf, end);
}

std::string render_step(const Step& s) {
  std::string out;
  if (s.think) out += "[think] " + *s.think + "\n";
  out += "[action] " + s.action + "\n";
  if (s.observation) out += "[obs] " + *s.observation + "\n";
  return out;
}

std::string elision_marker(std::size_t dropped) {
  return "[... " + std::to_string(dropped) + " steps elided ...]\n";
}

}  // namespace

std::string render_trajectory(const Trajectory& t, std::size_t char_cap) {
  std::string header = "Task: " + t.task + "\n" + "Outcome: " +
                       (t.outcome ? "success" : "failure") + "\n" +
                       "Reward: " + format_number(t.reward) + "\n";
  std::string footer;
  if (t.final_answer) footer = "\nFinal answer: " + *t.final_answer + "\n";

  std::vector<std::string> blocks;
  blocks.reserve(t.steps.size());
  for (const auto& s : t.steps) blocks.push_back("\n" + render_step(s));

  std::size_t total = header.size() + footer.size();
  for (const auto& b : blocks) total += b.size();

  std::string out = header;
  if (total <= char_cap) {
    for (const auto& b : blocks) out += b;
    return out + footer;
  }

  // Keep a prefix and a suffix of steps, growing from both ends alternately.
  const std::size_t fixed = header.size() + footer.size() + 1 + elision_marker(blocks.size()).size();
  std::size_t budget = char_cap > fixed ? char_cap - fixed : 0;
  std::size_t head = 0, tail = 0;
  bool take_head = true;
  while (head + tail < blocks.size()) {
    const std::size_t next = take_head ? head : blocks.size() - 1 - tail;
    if (blocks[next].size() > budget) break;
    budget -= blocks[next].size();
    (take_head ? head : tail) += 1;
    take_head = !take_head;
  }

  for (std::size_t i = 0; i < head; ++i) out += blocks[i];
  out += "\n" + elision_marker(blocks.size() - head - tail);
  for (std::size_t i = blocks.size() - tail; i < blocks.size(); ++i) out += blocks[i];
  return out + footer;
}

void to_json(json& j, const Step& s) {
  j = json::object();
  j["think"] = s.think ? json(*s.think) : json(nullptr);
  j["action"] = s.action;
  j["observation"] = s.observation ? json(*s.observation) : json(nullptr);
}

namespace {

std::optional<std::string> optional_string(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  if (!j.at(key).is_string())
    throw Error(ErrorKind::Parse, std::string("field '") + key + "' must be a string or null");
  return j.at(key).get<std::string>();
}

std::string required_string(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string())
    throw Error(ErrorKind::Parse, std::string("field '") + key + "' must be a string");
  return j.at(key).get<std::string>();
}

}  // namespace

void from_json(const json& j, Step& s) {
  if (!j.is_object()) throw Error(ErrorKind::Parse, "step must be an object");
  s.think = optional_string(j, "think");
  s.action = required_string(j, "action");
  s.observation = optional_string(j, "observation");
}

void to_json(json& j, const Trajectory& t) {
  j = json{{"id", t.id},
           {"task", t.task},
           {"steps", t.steps},
           {"outcome", t.outcome},
           {"reward", t.reward},
           {"final_answer", t.final_answer ? json(*t.final_answer) : json(nullptr)},
           {"domain", t.domain},
           {"target_model", t.target_model}};
}

void from_json(const json& j, Trajectory& t) {
  if (!j.is_object()) throw Error(ErrorKind::Parse, "trajectory must be an object");
  t.id = required_string(j, "id");
  t.task = required_string(j, "task");
  if (!j.contains("steps") || !j.at("steps").is_array())
    throw Error(ErrorKind::Parse, "field 'steps' must be an array");
  t.steps = j.at("steps").get<std::vector<Step>>();
  if (!j.contains("outcome") || !j.at("outcome").is_boolean())
    throw Error(ErrorKind::Parse, "field 'outcome' must be a boolean");
  t.outcome = j.at("outcome").get<bool>();
  if (!j.contains("reward") || !j.at("reward").is_number())
    throw Error(ErrorKind::Parse, "field 'reward' must be a number");
  t.reward = j.at("reward").get<double>();
  t.final_answer = optional_string(j, "final_answer");
  t.domain = required_string(j, "domain");
  t.target_model = required_string(j, "target_model");
}

std::vector<Trajectory> read_trajectories_jsonl(std::istream& in) {
  std::vector<Trajectory> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line).get<Trajectory>());
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Parse, "line " + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorKind::Parse, "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_trajectories_jsonl(std::ostream& out, const std::vector<Trajectory>& trajectories) {
  for (const auto& t : trajectories) out << json(t).dump() << '\n';
}

ExperiencePool load_pool(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open pool file '" + path + "'");
  return ExperiencePool(read_trajectories_jsonl(in));
}

}  // namespace skillcraft
