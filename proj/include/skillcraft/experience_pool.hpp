#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace skillcraft {

struct Step {
  std::optional<std::string> think;
  std::string action;
  std::optional<std::string> observation;

  bool operator==(const Step&) const = default;
};

/// One agent episode on a training-split task.
struct Trajectory {
  std::string id;
  std::string task;
  std::vector<Step> steps;
  bool outcome = false;
  double reward = 0.0;
  std::optional<std::string> final_answer;
  std::string domain;
  std::string target_model;

  bool operator==(const Trajectory&) const = default;
};

/// Labeled trajectories produced by one target model in one domain.
/// Immutable after construction.
class ExperiencePool {
 public:
  ExperiencePool() = default;

  /// Validates ids, steps and the shared domain/target. Throws Parse on violation.
  explicit ExperiencePool(std::vector<Trajectory> trajectories);

  const std::vector<Trajectory>& trajectories() const noexcept { return trajectories_; }
  std::size_t size() const noexcept { return trajectories_.size(); }
  bool empty() const noexcept { return trajectories_.empty(); }
  const std::string& domain() const noexcept { return domain_; }
  const std::string& target_model() const noexcept { return target_model_; }
  std::size_t success_count() const noexcept;
  std::size_t failure_count() const noexcept { return size() - success_count(); }

 private:
  std::vector<Trajectory> trajectories_;
  std::string domain_;
  std::string target_model_;
};

struct SplitSpec {
  double train_fraction = 0.5;
  std::uint64_t seed = 0;
};

struct TaskSplit {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

/// floor(x + 0.5), with a small guard so 0.5*11 style products round up.
std::size_t round_half_up(double x);

/// Seeded partition of task ids; |train| = round_half_up(fraction * n).
/// Both halves keep the input order.
TaskSplit split_tasks(const std::vector<std::string>& task_ids, const SplitSpec& spec);

/// Sub-pool with exactly round_half_up(ratio * size) successes and the rest failures.
/// Selected trajectories keep pool order.
ExperiencePool sample_by_success_ratio(const ExperiencePool& pool, double ratio, std::size_t size,
                                       std::uint64_t seed);

inline constexpr std::size_t kDefaultRenderCharCap = 60'000;

/// Prompt text for one trajectory: header (task, outcome, reward), then
/// [think]/[action]/[obs] lines per step, then the final answer if any.
/// Middle steps are elided when the text would exceed char_cap bytes.
std::string render_trajectory(const Trajectory& t, std::size_t char_cap = kDefaultRenderCharCap);

void to_json(nlohmann::json& j, const Step& s);
void from_json(const nlohmann::json& j, Step& s);
void to_json(nlohmann::json& j, const Trajectory& t);
void from_json(const nlohmann::json& j, Trajectory& t);

std::vector<Trajectory> read_trajectories_jsonl(std::istream& in);
void write_trajectories_jsonl(std::ostream& out, const std::vector<Trajectory>& trajectories);
ExperiencePool load_pool(const std::string& path);

}  // namespace skillcraft
