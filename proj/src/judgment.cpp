#include "skillcraft/judgment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

#include "skillcraft/error.hpp"
#include "skillcraft/model_output.hpp"
#include "skillcraft/parallel.hpp"
#include "skillcraft/prompts.hpp"
#include "skillcraft/rng.hpp"
#include "skillcraft/structured_reply.hpp"

namespace skillcraft {

using nlohmann::json;

std::string_view to_string(Choice c) noexcept { return c == Choice::A ? "A" : "B"; }

double SkillPair::gap() const noexcept { return std::abs(delta_a - delta_b); }

Choice SkillPair::higher() const noexcept { return delta_a >= delta_b ? Choice::A : Choice::B; }

std::vector<SkillPair> build_pairs(const std::vector<SkillArtifact>& artifacts, double min_gap) {
  std::vector<SkillPair> out;
  for (std::size_t i = 0; i < artifacts.size(); ++i) {
    for (std::size_t j = i + 1; j < artifacts.size(); ++j) {
      const auto& a = artifacts[i];
      const auto& b = artifacts[j];
      if (a.target != b.target || a.domain != b.domain) continue;
      if (!(std::abs(a.delta - b.delta) > min_gap)) continue;
      SkillPair p;
      p.id = a.domain + "/" + a.target + "/" + a.extractor + "-vs-" + b.extractor;
      p.target = a.target;
      p.domain = a.domain;
      p.skill_a = a.skill;
      p.skill_b = b.skill;
      p.delta_a = a.delta;
      p.delta_b = b.delta;
      out.push_back(std::move(p));
    }
  }
  return out;
}

void JudgeOptions::check() const {
  if (votes == 0 || votes % 2 == 0)
    throw Error(ErrorKind::InvalidArgument, "vote count must be odd, got " + std::to_string(votes));
}

namespace {

enum class Position { First, Second, Tie };

std::optional<Position> parse_position(const json& v) {
  if (!v.is_string()) return std::nullopt;
  std::string s;
  for (char c : v.get<std::string>())
    if (!std::isspace(static_cast<unsigned char>(c))) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (s == "skill1" || s == "1") return Position::First;
  if (s == "skill2" || s == "2") return Position::Second;
  if (s == "tie") return Position::Tie;
  return std::nullopt;
}

std::optional<Position> parse_unguided(const std::string& text) {
  const auto extracted = extract_json(text);
  if (extracted.ok() && extracted.value.is_object() && extracted.value.contains("choice")) {
    auto p = parse_position(extracted.value["choice"]);
    if (p && *p != Position::Tie) return p;
    return std::nullopt;
  }
  auto p = parse_position(json(trim(text)));
  if (p && *p != Position::Tie) return p;
  return std::nullopt;
}

std::optional<Position> parse_guided(const std::string& text, const std::vector<RubricDimension>& rubric) {
  const auto extracted = extract_json(text);
  if (!extracted.ok() || !extracted.value.is_object()) return std::nullopt;
  const json& root = extracted.value;
  if (!root.contains("dimensions") || !root["dimensions"].is_object()) return std::nullopt;
  int first = 0, second = 0;
  for (const auto& d : rubric) {
    if (!root["dimensions"].contains(d.name)) return std::nullopt;
    auto p = parse_position(root["dimensions"][d.name]);
    if (!p) return std::nullopt;
    if (*p == Position::First) ++first;
    if (*p == Position::Second) ++second;
  }
  if (first != second) return first > second ? Position::First : Position::Second;
  if (!root.contains("overall")) return std::nullopt;
  auto overall = parse_position(root["overall"]);
  if (!overall || *overall == Position::Tie) return std::nullopt;
  return overall;
}

std::string domain_text(const std::map<std::string, std::string>& descriptions, const std::string& domain) {
  auto it = descriptions.find(domain);
  return it == descriptions.end() ? domain : it->second;
}

ChatRequest user_request(std::string prompt, const std::string& model, double temperature) {
  ChatRequest req;
  req.model = model;
  req.temperature = temperature;
  req.messages.push_back({"user", std::move(prompt), {}, {}});
  return req;
}

struct VoteResult {
  std::optional<Choice> choice;
  bool swapped = false;
};

using PromptFn = std::function<std::string(const std::string& first, const std::string& second)>;
using ParseFn = std::function<std::optional<Position>(const std::string&)>;

JudgeVerdict run_votes(const SkillPair& pair, const Gateway& gateway, const JudgeOptions& opts,
                       const PromptFn& prompt, const ParseFn& parse) {
  opts.check();
  const std::string doc_a = prompts::skill_document(pair.skill_a);
  const std::string doc_b = prompts::skill_document(pair.skill_b);

  std::vector<VoteResult> results(opts.votes);
  parallel_for(opts.votes, opts.concurrency, [&](std::size_t i) {
    std::mt19937_64 rng(mix_seed(opts.seed, i));
    const bool swapped = coin_flip(rng);
    const ChatRequest req =
        user_request(swapped ? prompt(doc_b, doc_a) : prompt(doc_a, doc_b), opts.model, opts.temperature);
    results[i].swapped = swapped;
    for (int attempt = 0; attempt < 2; ++attempt) {
      const ChatResponse response = gateway.complete(req);
      if (auto pos = parse(response.text.value_or(""))) {
        const bool first = *pos == Position::First;
        results[i].choice = (first != swapped) ? Choice::A : Choice::B;
        return;
      }
    }
  });

  JudgeVerdict v;
  v.seed = opts.seed;
  for (const auto& r : results) {
    if (!r.choice) {
      ++v.discarded;
      continue;
    }
    v.votes.push_back(*r.choice);
    v.presentation_orders.push_back(r.swapped);
  }
  if (v.votes.empty())
    throw Error(ErrorKind::AllVotesUnparseable, "no parseable vote for pair '" + pair.id + "'");
  if (v.votes.size() % 2 == 0) {
    v.votes.pop_back();
    v.presentation_orders.pop_back();
    ++v.discarded;
  }
  const auto a = std::count(v.votes.begin(), v.votes.end(), Choice::A);
  v.majority = 2 * static_cast<std::size_t>(a) > v.votes.size() ? Choice::A : Choice::B;
  return v;
}

std::vector<prompts::DimensionText> dimension_texts(const std::vector<RubricDimension>& rubric) {
  std::vector<prompts::DimensionText> out;
  for (const auto& d : rubric) out.push_back({d.name, d.definition});
  return out;
}

}  // namespace

JudgeVerdict judge_pair_unguided(const SkillPair& pair, const Gateway& gateway, const JudgeOptions& opts) {
  const std::string domain = domain_text(opts.domain_descriptions, pair.domain);
  return run_votes(
      pair, gateway, opts,
      [&](const std::string& s1, const std::string& s2) { return prompts::pairwise_judge(domain, s1, s2); },
      parse_unguided);
}

JudgeVerdict judge_pair_guided(const SkillPair& pair, const std::vector<RubricDimension>& rubric,
                               const Gateway& gateway, const JudgeOptions& opts) {
  if (rubric.empty()) throw Error(ErrorKind::InvalidArgument, "guided judging needs a non-empty rubric");
  const std::string domain = domain_text(opts.domain_descriptions, pair.domain);
  const auto dims = dimension_texts(rubric);
  return run_votes(
      pair, gateway, opts,
      [&](const std::string& s1, const std::string& s2) {
        return prompts::dimension_judge(domain, s1, s2, dims, true);
      },
      [&](const std::string& text) { return parse_guided(text, rubric); });
}

std::vector<PairJudgment> judge_pairs(const std::vector<SkillPair>& pairs, const std::vector<RubricDimension>& rubric,
                                      const Gateway& gateway, const JudgeOptions& opts) {
  opts.check();
  std::vector<PairJudgment> out;
  out.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    JudgeOptions pair_opts = opts;
    pair_opts.seed = mix_seed(opts.seed, i);
    PairJudgment j{pairs[i], std::nullopt, std::nullopt};
    try {
      j.verdict = rubric.empty() ? judge_pair_unguided(pairs[i], gateway, pair_opts)
                                 : judge_pair_guided(pairs[i], rubric, gateway, pair_opts);
    } catch (const Error& e) {
      j.error = std::string(to_string(e.kind())) + ": " + e.what();
    }
    out.push_back(std::move(j));
  }
  return out;
}

AccuracySummary accuracy(const std::vector<PairJudgment>& judgments) {
  AccuracySummary s;
  for (const auto& j : judgments) {
    if (!j.verdict) continue;
    ++s.total;
    if (j.correct()) ++s.correct;
  }
  return s;
}

std::vector<AccuracyBucket> bucket_accuracy(const std::vector<PairJudgment>& judgments,
                                            const std::vector<double>& edges) {
  if (edges.empty()) throw Error(ErrorKind::InvalidArgument, "bucket edges must not be empty");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1])) throw Error(ErrorKind::InvalidArgument, "bucket edges must increase");

  std::vector<AccuracyBucket> buckets(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    buckets[i].lower = edges[i];
    if (i + 1 < edges.size()) buckets[i].upper = edges[i + 1];
  }
  for (const auto& j : judgments) {
    if (!j.verdict) continue;
    const double gap = j.pair.gap();
    if (gap < edges.front())
      throw Error(ErrorKind::InvalidArgument, "pair '" + j.pair.id + "' has gap below the first bucket edge");
    const auto idx = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), gap) - edges.begin()) - 1;
    ++buckets[idx].total;
    if (j.correct()) ++buckets[idx].correct;
  }
  std::erase_if(buckets, [](const AccuracyBucket& b) { return b.total == 0; });
  return buckets;
}

namespace {

std::string edge_text(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

std::string percent(double fraction) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << fraction * 100.0 << "%";
  return os.str();
}

}  // namespace

std::string accuracy_table(const AccuracySummary& overall, const std::vector<AccuracyBucket>& buckets) {
  std::ostringstream os;
  os << std::left << std::setw(10) << "gap (pp)" << std::right << std::setw(7) << "pairs" << std::setw(9)
     << "correct" << std::setw(10) << "accuracy" << "\n";
  for (const auto& b : buckets) {
    const std::string label =
        b.upper ? edge_text(b.lower) + "-" + edge_text(*b.upper) : ">=" + edge_text(b.lower);
    os << std::left << std::setw(10) << label << std::right << std::setw(7) << b.total << std::setw(9)
       << b.correct << std::setw(10) << percent(b.accuracy()) << "\n";
  }
  os << std::left << std::setw(10) << "overall" << std::right << std::setw(7) << overall.total << std::setw(9)
     << overall.correct << std::setw(10) << percent(overall.accuracy()) << "\n";
  return os.str();
}

namespace {

std::string lower_key(const std::string& s) {
  std::string out;
  for (char c : s) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<prompts::DimensionText> parse_dimension_list(const json& arr, const char* name_key) {
  if (!arr.is_array()) throw ReplyParseError("expected a JSON array of dimensions");
  std::vector<prompts::DimensionText> out;
  std::set<std::string> seen;
  for (const auto& item : arr) {
    if (!item.is_object() || !item.contains(name_key) || !item[name_key].is_string())
      throw ReplyParseError(std::string("each entry needs a string \"") + name_key + "\"");
    std::string name = trim(item[name_key].get<std::string>());
    if (name.empty()) throw ReplyParseError("dimension names must not be empty");
    std::string definition;
    if (item.contains("definition") && item["definition"].is_string()) definition = trim(item["definition"].get<std::string>());
    if (!seen.insert(lower_key(name)).second) continue;
    out.push_back({std::move(name), std::move(definition)});
  }
  return out;
}

json reply_object(const std::string& text, const char* key) {
  const auto extracted = extract_json(text);
  if (!extracted.ok()) throw ReplyParseError(extracted.error);
  if (!extracted.value.is_object() || !extracted.value.contains(key))
    throw ReplyParseError(std::string("reply must be an object with a \"") + key + "\" field");
  return extracted.value[key];
}

}  // namespace

std::vector<RubricDimension> discover_rubric(const std::vector<SkillPair>& pairs, const Gateway& gateway,
                                             const RubricOptions& opts) {
  if (pairs.empty()) throw Error(ErrorKind::EmptyInput, "rubric discovery needs at least one pair");
  if (opts.dimensions == 0 || opts.max_consolidation_rounds == 0)
    throw Error(ErrorKind::InvalidArgument, "dimension count and consolidation rounds must be positive");

  std::vector<prompts::DimensionText> candidates;
  for (const auto& pair : pairs) {
    const bool a_higher = pair.higher() == Choice::A;
    const std::string prompt = prompts::rubric_differences(
        domain_text(opts.domain_descriptions, pair.domain),
        prompts::skill_document(a_higher ? pair.skill_a : pair.skill_b),
        prompts::skill_document(a_higher ? pair.skill_b : pair.skill_a));
    auto diffs = ask_structured(gateway, user_request(prompt, opts.model, opts.temperature),
                                [](const std::string& text) {
                                  return parse_dimension_list(reply_object(text, "differences"), "dimension");
                                });
    candidates.insert(candidates.end(), diffs.begin(), diffs.end());
  }
  if (candidates.empty()) return {};

  for (std::size_t round = 0; round < opts.max_consolidation_rounds; ++round) {
    const std::string prompt = prompts::rubric_consolidation(candidates, opts.dimensions);
    candidates = ask_structured(gateway, user_request(prompt, opts.model, opts.temperature),
                                [](const std::string& text) {
                                  auto dims = parse_dimension_list(reply_object(text, "dimensions"), "name");
                                  if (dims.empty()) throw ReplyParseError("consolidation returned no dimensions");
                                  return dims;
                                });
    if (candidates.size() <= opts.dimensions) break;
  }
  if (candidates.size() > opts.dimensions) candidates.resize(opts.dimensions);

  std::vector<RubricDimension> out;
  for (auto& c : candidates) out.push_back({std::move(c.name), std::move(c.definition), std::nullopt});
  return out;
}

RubricValidation validate_rubric(const std::vector<RubricDimension>& rubric, const std::vector<SkillPair>& pairs,
                                 const Gateway& gateway, const RubricOptions& opts) {
  if (pairs.empty()) throw Error(ErrorKind::EmptyInput, "rubric validation needs at least one pair");
  const auto dims = dimension_texts(rubric);
  std::vector<double> score(rubric.size(), 0.0);

  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& pair = pairs[p];
    std::mt19937_64 rng(mix_seed(opts.seed, p));
    const bool swapped = coin_flip(rng);
    const std::string doc_a = prompts::skill_document(pair.skill_a);
    const std::string doc_b = prompts::skill_document(pair.skill_b);
    const std::string prompt = prompts::dimension_judge(domain_text(opts.domain_descriptions, pair.domain),
                                                        swapped ? doc_b : doc_a, swapped ? doc_a : doc_b, dims,
                                                        false);
    const ChatResponse response = gateway.complete(user_request(prompt, opts.model, opts.temperature));

    // Position ("Skill 1" is index 0) at which the higher-Δ skill was shown.
    const bool higher_first = (pair.higher() == Choice::A) != swapped;
    const auto extracted = extract_json(response.text.value_or(""));
    const json* verdicts = nullptr;
    if (extracted.ok() && extracted.value.is_object() && extracted.value.contains("dimensions") &&
        extracted.value["dimensions"].is_object())
      verdicts = &extracted.value["dimensions"];

    for (std::size_t d = 0; d < rubric.size(); ++d) {
      std::optional<Position> pos;
      if (verdicts && verdicts->contains(rubric[d].name)) pos = parse_position((*verdicts)[rubric[d].name]);
      if (!pos || *pos == Position::Tie) {
        score[d] += 0.5;
      } else if ((*pos == Position::First) == higher_first) {
        score[d] += 1.0;
      }
    }
  }

  RubricValidation out;
  out.raw = rubric;
  for (std::size_t d = 0; d < rubric.size(); ++d) {
    out.raw[d].better_rate = score[d] / static_cast<double>(pairs.size());
    if (*out.raw[d].better_rate >= opts.threshold - 1e-12) out.validated.push_back(out.raw[d]);
  }
  return out;
}

std::string emit_meta_skill(const std::vector<RubricDimension>& validated) {
  if (validated.empty()) throw Error(ErrorKind::InvalidArgument, "cannot emit a meta-skill from an empty rubric");
  std::string out =
      "## Extraction Quality Guidance\n\n"
      "Every skill you write must satisfy each of the following quality dimensions.\n";
  for (const auto& d : validated) out += "\n### " + d.name + "\n" + d.definition + "\n";
  return out;
}

void to_json(json& j, const SkillArtifact& a) {
  j = json{{"extractor", a.extractor}, {"target", a.target}, {"domain", a.domain}, {"delta", a.delta},
           {"skill", a.skill}};
}

void from_json(const json& j, SkillArtifact& a) {
  a.extractor = j.at("extractor").get<std::string>();
  a.target = j.at("target").get<std::string>();
  a.domain = j.at("domain").get<std::string>();
  a.delta = j.at("delta").get<double>();
  a.skill = j.at("skill").get<Skill>();
}

void to_json(json& j, const SkillPair& p) {
  j = json{{"id", p.id},           {"target", p.target},   {"domain", p.domain},  {"skill_a", p.skill_a},
           {"skill_b", p.skill_b}, {"delta_a", p.delta_a}, {"delta_b", p.delta_b}};
}

void from_json(const json& j, SkillPair& p) {
  p.id = j.value("id", std::string{});
  p.target = j.at("target").get<std::string>();
  p.domain = j.at("domain").get<std::string>();
  p.skill_a = j.at("skill_a").get<Skill>();
  p.skill_b = j.at("skill_b").get<Skill>();
  p.delta_a = j.at("delta_a").get<double>();
  p.delta_b = j.at("delta_b").get<double>();
}

void to_json(json& j, const JudgeVerdict& v) {
  json votes = json::array();
  for (auto c : v.votes) votes.push_back(std::string(to_string(c)));
  j = json{{"votes", votes},
           {"presentation_orders", v.presentation_orders},
           {"majority", std::string(to_string(v.majority))},
           {"seed", v.seed},
           {"discarded", v.discarded}};
}

void to_json(json& j, const PairJudgment& p) {
  j = json{{"id", p.pair.id},
           {"target", p.pair.target},
           {"domain", p.pair.domain},
           {"gap", p.pair.gap()},
           {"higher", std::string(to_string(p.pair.higher()))},
           {"verdict", p.verdict ? json(*p.verdict) : json(nullptr)},
           {"correct", p.verdict ? json(p.correct()) : json(nullptr)}};
  if (p.error) j["error"] = *p.error;
}

void to_json(json& j, const RubricDimension& d) {
  j = json{{"name", d.name}, {"definition", d.definition}};
  if (d.better_rate) j["better_rate"] = *d.better_rate;
}

void from_json(const json& j, RubricDimension& d) {
  d.name = j.at("name").get<std::string>();
  d.definition = j.value("definition", std::string{});
  if (j.contains("better_rate") && !j["better_rate"].is_null()) d.better_rate = j["better_rate"].get<double>();
  else d.better_rate.reset();
}

std::vector<SkillPair> read_pairs_jsonl(std::istream& in) {
  std::vector<SkillPair> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line).get<SkillPair>());
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Parse, "pairs line " + std::to_string(lineno) + ": " + e.what());
    }
    if (out.back().id.empty()) out.back().id = "pair-" + std::to_string(out.size());
  }
  return out;
}

void write_pairs_jsonl(std::ostream& out, const std::vector<SkillPair>& pairs) {
  for (const auto& p : pairs) out << json(p).dump() << "\n";
}

std::vector<RubricDimension> load_rubric_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open rubric file '" + path + "'");
  try {
    const json j = json::parse(in);
    const json& dims = j.is_object() ? j.at("dimensions") : j;
    return dims.get<std::vector<RubricDimension>>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, "rubric file '" + path + "': " + e.what());
  }
}

}  // namespace skillcraft
