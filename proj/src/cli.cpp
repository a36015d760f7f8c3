#include "skillcraft/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <unistd.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "skillcraft/config.hpp"
#include "skillcraft/error.hpp"
#include "skillcraft/experience_pool.hpp"
#include "skillcraft/extraction.hpp"
#include "skillcraft/injection.hpp"
#include "skillcraft/judgment.hpp"
#include "skillcraft/utility_metrics.hpp"

namespace skillcraft {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::InvalidArgument:
    case ErrorKind::ModeMismatch:
      return kExitUsage;
    default:
      return kExitRuntime;
  }
}

void report_error(std::ostream& err, std::string_view kind, const std::string& message,
                  const json& extra = json::object()) {
  json j{{"error", kind}, {"message", message}};
  for (const auto& [k, v] : extra.items()) j[k] = v;
  err << j.dump() << "\n";
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
  out << text;
}

template <typename Fn>
auto open_and(const std::string& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  return fn(in);
}

// --- extract ---------------------------------------------------------------

struct ExtractArgs {
  std::string pool;
  std::string extractor;
  std::string guidance;
  std::optional<double> ratio;
  std::optional<std::size_t> size;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int cmd_extract(const Config& config, const ExtractArgs& a, std::ostream& out) {
  ExtractionConfig cfg = config.extraction;
  cfg.extractor_model = a.extractor;
  config.model(a.extractor);  // fail early on undeclared ids
  if (!a.guidance.empty()) cfg.guidance = read_text(a.guidance);

  ExperiencePool pool = load_pool(a.pool);
  if (a.size && !a.ratio) throw Error(ErrorKind::InvalidArgument, "--size requires --ratio");
  if (a.ratio) {
    if (*a.ratio < 0.0 || *a.ratio > 1.0) throw Error(ErrorKind::InvalidArgument, "--ratio must be in [0, 1]");
    pool = sample_by_success_ratio(pool, *a.ratio, a.size.value_or(pool.size()), a.seed.value_or(config.seed));
  }
  out << "pool: " << pool.success_count() << " success / " << pool.failure_count() << " failure\n";

  const Gateway gateway = config.gateway(a.extractor);
  const ExtractionResult result = extract(pool, cfg, gateway);

  out << "analysis calls: " << result.analysis_calls << "\n";
  out << "levels: " << result.merge.levels() << "\n";
  for (std::size_t l = 0; l < result.merge.levels(); ++l)
    out << "  level " << l + 1 << ": " << result.merge.level_sizes[l] << " -> " << result.merge.level_sizes[l + 1]
        << " (" << result.merge.merge_calls[l] << " merge calls)\n";
  out << "merge calls: " << result.merge.total_calls() << "\n";
  out << "synthesis turns: " << result.synthesis_turns << "\n";

  fs::path path = a.out;
  if (path.empty()) path = fs::path(a.pool).replace_extension("").string() + "." + a.extractor + ".skills.json";
  json doc = skills_to_json(result.store.skills());
  write_text(path, doc.dump(2) + "\n");
  out << "skills: " << result.store.size() << "\n";
  out << "wrote " << path.string() << "\n";
  return kExitOk;
}

// --- render ----------------------------------------------------------------

int cmd_render(const std::string& skills_path, const std::string& mode, std::ostream& out) {
  SkillStore store(SkillBudget{1000, 1'000'000, std::nullopt});
  for (const auto& s : load_skill_file(skills_path)) store.create(s);
  store.seal();

  InjectionMode m = choose_mode(store);
  if (mode == "single") {
    if (store.size() != 1)
      throw Error(ErrorKind::ModeMismatch,
                  "single mode needs exactly 1 skill, file has " + std::to_string(store.size()));
    m = InjectionMode::SingleInline;
  } else if (mode == "multi") {
    m = InjectionMode::MultiTool;
  }
  out << (m == InjectionMode::SingleInline ? render_single(store.skills().front()) : render_multi_preamble(store));
  return kExitOk;
}

// --- report ----------------------------------------------------------------

int cmd_report(const std::string& runs_path, const std::string& json_out, const std::string& format,
               const std::string& color, std::ostream& out, std::ostream& err) {
  const auto records = open_and(runs_path, [](std::istream& in) { return read_runs_jsonl(in); });
  const MatrixBuild build = build_matrices(records);
  for (const auto& m : build.missing)
    report_error(err, m.reason, "cell not computable",
                 {{"domain", m.domain}, {"extractor", m.extractor}, {"target", m.target}});
  if (build.matrices.empty()) {
    report_error(err, "NoComputableCell",
                 "no cell could be computed; " + std::to_string(build.missing.size()) + " listed above");
    return kExitRuntime;
  }

  const json doc = matrix_report_json(build.matrices);
  if (!json_out.empty()) write_text(json_out, doc.dump(2) + "\n");
  if (format == "json") {
    out << doc.dump(2) << "\n";
  } else {
    const bool use_color = color == "always" || (color == "auto" && &out == &std::cout && ::isatty(1));
    out << matrix_report_text(build.matrices, use_color);
  }
  return kExitOk;
}

// --- judge -----------------------------------------------------------------

struct JudgeArgs {
  std::string pairs;
  std::string rubric = "none";
  std::optional<std::size_t> votes;
  std::optional<std::uint64_t> seed;
  std::string model;
  std::string out;
};

std::vector<SkillPair> load_pairs(const std::string& path) {
  auto pairs = open_and(path, [](std::istream& in) { return read_pairs_jsonl(in); });
  if (pairs.empty()) throw Error(ErrorKind::EmptyInput, "no pairs in '" + path + "'");
  return pairs;
}

std::string judge_model(const Config& config, const std::string& override_id) {
  std::string id = override_id.empty() ? config.judge.model : override_id;
  if (id.empty()) throw Error(ErrorKind::Config, "no judge model: set judge.model or pass --model");
  config.model(id);
  return id;
}

int cmd_judge(const Config& config, const JudgeArgs& a, std::ostream& out, std::ostream& err) {
  JudgeOptions opts;
  opts.votes = a.votes.value_or(config.judge.votes);
  opts.seed = a.seed.value_or(config.seed);
  opts.concurrency = config.judge.concurrency;
  opts.temperature = config.judge.temperature;
  opts.domain_descriptions = config.domains;
  opts.check();
  opts.model = judge_model(config, a.model);

  std::vector<RubricDimension> rubric;
  if (a.rubric != "none") {
    rubric = load_rubric_file(a.rubric);
    if (rubric.empty()) throw Error(ErrorKind::InvalidArgument, "rubric file '" + a.rubric + "' has no dimensions");
  }
  const auto pairs = load_pairs(a.pairs);
  const Gateway gateway = config.gateway(opts.model);
  const auto judgments = judge_pairs(pairs, rubric, gateway, opts);

  std::ostringstream jsonl;
  std::size_t failed = 0;
  for (const auto& j : judgments) {
    jsonl << json(j).dump() << "\n";
    if (j.error) {
      ++failed;
      report_error(err, "PairFailed", *j.error, {{"pair", j.pair.id}});
    }
  }
  if (!a.out.empty()) write_text(a.out, jsonl.str());

  out << "mode: " << (rubric.empty() ? "unguided" : "guided (" + std::to_string(rubric.size()) + " dimensions)")
      << ", votes: " << opts.votes << ", seed: " << opts.seed << "\n";
  const auto overall = accuracy(judgments);
  out << accuracy_table(overall, bucket_accuracy(judgments));
  out << "failed pairs: " << failed << "\n";
  return failed == judgments.size() ? kExitRuntime : kExitOk;
}

// --- rubric ----------------------------------------------------------------

struct RubricArgs {
  std::string pairs;
  std::optional<std::size_t> dims;
  std::optional<double> threshold;
  std::optional<std::size_t> rounds;
  std::optional<std::uint64_t> seed;
  std::string model;
  std::string out_dir = "rubric-out";
};

int cmd_rubric(const Config& config, const RubricArgs& a, std::ostream& out, std::ostream& err) {
  RubricOptions opts;
  opts.dimensions = a.dims.value_or(config.rubric.dimensions);
  opts.threshold = a.threshold.value_or(config.rubric.threshold);
  opts.max_consolidation_rounds = a.rounds.value_or(config.rubric.max_consolidation_rounds);
  opts.seed = a.seed.value_or(config.seed);
  opts.temperature = config.judge.temperature;
  opts.domain_descriptions = config.domains;
  if (opts.threshold < 0.0 || opts.threshold > 1.0)
    throw Error(ErrorKind::InvalidArgument, "--threshold must be in [0, 1]");
  opts.model = judge_model(config, a.model);

  const auto pairs = load_pairs(a.pairs);
  const Gateway gateway = config.gateway(opts.model);
  const auto raw = discover_rubric(pairs, gateway, opts);
  const fs::path dir = a.out_dir;
  write_text(dir / "raw_rubric.json", json{{"dimensions", raw}}.dump(2) + "\n");
  if (raw.empty()) {
    report_error(err, "EmptyRubric", "rubric discovery found no differences");
    return kExitRuntime;
  }

  const RubricValidation v = validate_rubric(raw, pairs, gateway, opts);
  write_text(dir / "rubric.json",
             json{{"dimensions", v.raw}, {"threshold", opts.threshold}, {"seed", opts.seed}}.dump(2) + "\n");
  write_text(dir / "validated_rubric.json", json{{"dimensions", v.validated}}.dump(2) + "\n");

  out << "pairs: " << pairs.size() << "\n";
  for (const auto& d : v.raw) {
    const bool kept = *d.better_rate >= opts.threshold - 1e-12;
    std::ostringstream rate;
    rate << std::fixed << std::setprecision(1) << *d.better_rate * 100.0 << "%";
    out << (kept ? "  * " : "    ") << d.name << ": " << rate.str() << "\n";
  }
  out << "validated: " << v.validated.size() << " of " << v.raw.size() << " at threshold " << opts.threshold << "\n";

  if (v.validated.empty()) {
    report_error(err, "EmptyRubric",
                 "no dimension reached the threshold; meta-skill not emitted");
    return kExitRuntime;
  }
  write_text(dir / "meta_skill.md", emit_meta_skill(v.validated));
  out << "wrote " << (dir / "meta_skill.md").string() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Skill extraction, injection and evaluation toolkit", "skillcraft"};
  app.require_subcommand(1);
  std::string config_path;

  auto* extract = app.add_subcommand("extract", "Distil a skill set from an experience pool");
  ExtractArgs ex;
  extract->add_option("pool", ex.pool, "Trajectory pool (JSON Lines)")->required()->check(CLI::ExistingFile);
  extract->add_option("--extractor", ex.extractor, "Declared model id")->required();
  extract->add_option("--guidance", ex.guidance, "Text appended to every extractor system prompt")
      ->check(CLI::ExistingFile);
  extract->add_option("--ratio", ex.ratio, "Success fraction of the sampled sub-pool");
  extract->add_option("--size", ex.size, "Size of the sampled sub-pool");
  extract->add_option("--seed", ex.seed, "Sampling seed");
  extract->add_option("--out", ex.out, "Output skill file");

  auto* render = app.add_subcommand("render", "Print the system-prompt section for a skill file");
  std::string render_path, mode = "auto";
  render->add_option("skills", render_path, "Skill file")->required()->check(CLI::ExistingFile);
  render->add_option("--mode", mode, "single, multi or auto")->check(CLI::IsMember({"single", "multi", "auto"}));

  auto* report = app.add_subcommand("report", "Build the utility matrix from run records");
  std::string runs_path, json_out, format = "text", color = "auto";
  report->add_option("runs", runs_path, "Run records (JSON Lines)")->required()->check(CLI::ExistingFile);
  report->add_option("--json", json_out, "Also write the JSON report here");
  report->add_option("--format", format, "text or json")->check(CLI::IsMember({"text", "json"}));
  report->add_option("--color", color, "auto, always or never")->check(CLI::IsMember({"auto", "always", "never"}));

  auto* judge = app.add_subcommand("judge", "Pairwise judging of skill pairs");
  JudgeArgs jd;
  judge->add_option("pairs", jd.pairs, "Skill pairs (JSON Lines)")->required()->check(CLI::ExistingFile);
  judge->add_option("--rubric", jd.rubric, "Rubric JSON file, or 'none' for unguided judging");
  judge->add_option("--votes", jd.votes, "Votes per pair (odd)");
  judge->add_option("--seed", jd.seed, "Presentation-order seed");
  judge->add_option("--model", jd.model, "Judge model id (defaults to judge.model)");
  judge->add_option("--out", jd.out, "Verdicts output (JSON Lines)");

  auto* rubric = app.add_subcommand("rubric", "Discover and validate a quality rubric");
  RubricArgs rb;
  rubric->add_option("pairs", rb.pairs, "Skill pairs (JSON Lines)")->required()->check(CLI::ExistingFile);
  rubric->add_option("--dims", rb.dims, "Target dimension count");
  rubric->add_option("--threshold", rb.threshold, "Minimum better-rate for a validated dimension");
  rubric->add_option("--rounds", rb.rounds, "Maximum consolidation rounds");
  rubric->add_option("--seed", rb.seed, "Presentation-order seed");
  rubric->add_option("--model", rb.model, "Judge model id (defaults to judge.model)");
  rubric->add_option("--out-dir", rb.out_dir, "Directory for rubric artifacts");

  for (auto* sub : {extract, judge, rubric})
    sub->add_option("-c,--config", config_path, "Config file (JSON)")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    report_error(err, "UsageError", e.what());
    return kExitUsage;
  }

  try {
    if (*render) return cmd_render(render_path, mode, out);
    if (*report) return cmd_report(runs_path, json_out, format, color, out, err);

    const Config config = load_config(config_path);
    if (*extract) return cmd_extract(config, ex, out);
    if (*judge) return cmd_judge(config, jd, out, err);
    if (*rubric) return cmd_rubric(config, rb, out, err);
  } catch (const Error& e) {
    json extra = json::object();
    if (!e.detail().empty()) extra["detail"] = e.detail();
    report_error(err, to_string(e.kind()), e.what(), extra);
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    report_error(err, "Internal", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace skillcraft
