#include "skillcraft/utility_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include <boost/math/special_functions/gamma.hpp>

#include "skillcraft/error.hpp"

namespace skillcraft {

using nlohmann::json;

void to_json(json& j, const RunRecord& r) {
  j = json{{"extractor", r.extractor ? json(*r.extractor) : json(nullptr)},
           {"target", r.target},
           {"domain", r.domain},
           {"run_index", r.run_index},
           {"score", r.score}};
}

void from_json(const json& j, RunRecord& r) {
  if (!j.is_object()) throw Error(ErrorKind::Parse, "run record must be an object");
  try {
    const auto& e = j.at("extractor");
    r.extractor = e.is_null() ? std::nullopt : std::optional<std::string>(e.get<std::string>());
    r.target = j.at("target").get<std::string>();
    r.domain = j.at("domain").get<std::string>();
    r.run_index = j.at("run_index").get<int>();
    r.score = j.at("score").get<double>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("run record: ") + e.what());
  }
  if (!(r.score >= 0.0 && r.score <= 100.0))
    throw Error(ErrorKind::Parse, "run record score " + std::to_string(r.score) + " outside [0, 100]");
}

std::vector<RunRecord> read_runs_jsonl(std::istream& in) {
  std::vector<RunRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line).get<RunRecord>());
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Parse, "line " + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorKind::Parse, "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

namespace {

double mean(const std::vector<double>& xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

}  // namespace

double delta(const std::vector<RunRecord>& records, const std::string& extractor, const std::string& target,
             const std::string& domain) {
  std::vector<double> base, skill;
  for (const auto& r : records) {
    if (r.target != target || r.domain != domain) continue;
    if (!r.extractor) base.push_back(r.score);
    else if (*r.extractor == extractor) skill.push_back(r.score);
  }
  if (base.empty())
    throw Error(ErrorKind::MissingBaseline, "no baseline runs for target '" + target + "' in '" + domain + "'");
  if (skill.empty())
    throw Error(ErrorKind::MissingSkillRuns,
                "no runs of target '" + target + "' with skills from '" + extractor + "' in '" + domain + "'");
  return mean(skill) - mean(base);
}

void UtilityMatrix::set_base(const std::string& target, double mean_score) {
  if (!base_.count(target) && std::find(targets_.begin(), targets_.end(), target) == targets_.end())
    targets_.push_back(target);
  base_[target] = mean_score;
}

void UtilityMatrix::set_delta(const std::string& extractor, const std::string& target, double d) {
  if (!base_.count(target))
    throw Error(ErrorKind::MissingBaseline, "Δ cell for target '" + target + "' has no base entry");
  if (std::find(extractors_.begin(), extractors_.end(), extractor) == extractors_.end())
    extractors_.push_back(extractor);
  delta_[{extractor, target}] = d;
}

std::optional<double> UtilityMatrix::base(const std::string& target) const {
  auto it = base_.find(target);
  return it == base_.end() ? std::nullopt : std::optional<double>(it->second);
}

std::optional<double> UtilityMatrix::cell(const std::string& extractor, const std::string& target) const {
  auto it = delta_.find({extractor, target});
  return it == delta_.end() ? std::nullopt : std::optional<double>(it->second);
}

MatrixBuild build_matrices(const std::vector<RunRecord>& records) {
  MatrixBuild out;
  std::vector<std::string> domains;
  for (const auto& r : records)
    if (std::find(domains.begin(), domains.end(), r.domain) == domains.end()) domains.push_back(r.domain);

  for (const auto& domain : domains) {
    std::vector<std::string> targets, extractors;
    std::map<std::string, std::vector<double>> base;
    std::map<std::pair<std::string, std::string>, std::vector<double>> skill;
    for (const auto& r : records) {
      if (r.domain != domain) continue;
      if (std::find(targets.begin(), targets.end(), r.target) == targets.end()) targets.push_back(r.target);
      if (!r.extractor) {
        base[r.target].push_back(r.score);
      } else {
        if (std::find(extractors.begin(), extractors.end(), *r.extractor) == extractors.end())
          extractors.push_back(*r.extractor);
        skill[{*r.extractor, r.target}].push_back(r.score);
      }
    }

    UtilityMatrix m(domain);
    for (const auto& t : targets)
      if (base.count(t)) m.set_base(t, mean(base[t]));
    for (const auto& t : targets) {
      bool any_skill = false;
      for (const auto& e : extractors) {
        auto it = skill.find({e, t});
        if (it == skill.end()) continue;
        any_skill = true;
        if (!base.count(t)) {
          out.missing.push_back({domain, e, t, "MissingBaseline"});
          continue;
        }
        m.set_delta(e, t, mean(it->second) - mean(base[t]));
      }
      if (!any_skill) out.missing.push_back({domain, "*", t, "MissingSkillRuns"});
    }
    if (m.cell_count() > 0) out.matrices.push_back(std::move(m));
  }
  return out;
}

double extraction_efficacy(const UtilityMatrix& m, const std::string& extractor) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [key, d] : m.cells()) {
    if (key.first != extractor) continue;
    sum += d;
    ++n;
  }
  if (n == 0) throw Error(ErrorKind::UnknownExtractor, "no cells for extractor '" + extractor + "'");
  return sum / static_cast<double>(n);
}

double target_evolvability(const UtilityMatrix& m, const std::string& target) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [key, d] : m.cells()) {
    if (key.second != target) continue;
    sum += d;
    ++n;
  }
  if (n == 0) throw Error(ErrorKind::UnknownTarget, "no cells for target '" + target + "'");
  return sum / static_cast<double>(n);
}

double negative_transfer_rate(const UtilityMatrix& m) { return negative_transfer_rate(std::vector{m}); }

double negative_transfer_rate(const std::vector<UtilityMatrix>& ms) {
  std::size_t negative = 0, total = 0;
  for (const auto& m : ms) {
    for (const auto& [key, d] : m.cells()) {
      ++total;
      if (d < 0.0) ++negative;
    }
  }
  if (total == 0) throw Error(ErrorKind::EmptyInput, "negative_transfer_rate: matrix has no cells");
  return static_cast<double>(negative) / static_cast<double>(total);
}

std::vector<std::vector<double>> FactorDesign::table() const {
  std::vector<std::vector<double>> out(blocks.size(), std::vector<double>(treatments.size()));
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    for (std::size_t j = 0; j < treatments.size(); ++j) {
      auto it = observations.find({blocks[i], treatments[j]});
      if (it == observations.end())
        throw Error(ErrorKind::IncompleteDesign,
                    "no observation for block '" + blocks[i] + "', treatment '" + treatments[j] + "'");
      out[i][j] = it->second;
    }
  }
  return out;
}

std::vector<double> midranks(const std::vector<double>& scores) {
  const std::size_t k = scores.size();
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  std::vector<double> ranks(k);
  for (std::size_t i = 0; i < k;) {
    std::size_t j = i;
    while (j + 1 < k && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

namespace {

// Statistic from rank sums: 12/(nk(k+1)) ΣR² − 3n(k+1), divided by the tie
// correction 1 − Σ(t³−t)/(nk(k²−1)). Returns 0 when every block is fully tied.
double friedman_from_sums(const std::vector<double>& rank_sums, double n, double k, double tie_term) {
  const double correction = 1.0 - tie_term / (n * k * (k * k - 1.0));
  if (correction <= 1e-12) return 0.0;
  double sum_sq = 0.0;
  for (double r : rank_sums) sum_sq += r * r;
  const double raw = 12.0 / (n * k * (k + 1.0)) * sum_sq - 3.0 * n * (k + 1.0);
  return std::max(0.0, raw / correction);
}

double tie_term_of(const std::vector<double>& scores) {
  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  double term = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    term += t * t * t - t;
    i = j + 1;
  }
  return term;
}

// Exact permutation p-value: convolve each block's distinct rank
// arrangements into a distribution over rank-sum vectors (ranks doubled so
// mid-ranks stay integral). Rank-sum vectors are packed into one integer
// when they fit, which keeps the common small designs fast.
constexpr std::size_t kMaxExactStates = 4'000'000;

std::vector<std::vector<int>> doubled_arrangements(const std::vector<double>& block) {
  std::vector<int> doubled;
  for (double r : block) doubled.push_back(static_cast<int>(std::lround(r * 2.0)));
  std::sort(doubled.begin(), doubled.end());
  std::vector<std::vector<int>> out;
  do {
    out.push_back(doubled);
  } while (std::next_permutation(doubled.begin(), doubled.end()));
  return out;
}

template <typename Key, typename Map, typename Add, typename Unpack>
double convolve_and_tail(const std::vector<std::vector<double>>& ranks, Key zero, const Add& add, const Unpack& unpack,
                         double observed, double n, double k, double tie_term) {
  // The statistic is symmetric in the columns, so the first block can stay
  // in one fixed arrangement without changing the distribution.
  Map dist;
  dist.emplace(add(zero, doubled_arrangements(ranks.front()).front()), 1.0);
  for (std::size_t b = 1; b < ranks.size(); ++b) {
    const auto arrangements = doubled_arrangements(ranks[b]);
    const double w = 1.0 / static_cast<double>(arrangements.size());
    Map next;
    for (const auto& [sums, p] : dist) {
      for (const auto& a : arrangements) next[add(sums, a)] += p * w;
      if (next.size() > kMaxExactStates)
        throw Error(ErrorKind::InvalidArgument, "exact Friedman distribution too large for this design");
    }
    dist = std::move(next);
  }

  const double tol = 1e-9 * std::max(1.0, observed);
  double p = 0.0;
  std::vector<double> sums(static_cast<std::size_t>(k));
  for (const auto& [key, prob] : dist) {
    unpack(key, sums);
    if (friedman_from_sums(sums, n, k, tie_term) >= observed - tol) p += prob;
  }
  return std::min(1.0, p);
}

double exact_p_value(const std::vector<std::vector<double>>& ranks, double observed, double n, double k,
                     double tie_term) {
  const std::size_t kk = static_cast<std::size_t>(k);
  // Largest doubled rank sum is 2·k·n, so each column needs that many + 1 values.
  const std::uint64_t radix = 2 * static_cast<std::uint64_t>(k) * static_cast<std::uint64_t>(n) + 1;
  const double packed_range = std::pow(static_cast<double>(radix), k);
  if (packed_range < 1.8e19) {
    auto add = [&](std::uint64_t key, const std::vector<int>& a) {
      std::uint64_t place = 1;
      for (int v : a) {
        key += place * static_cast<std::uint64_t>(v);
        place *= radix;
      }
      return key;
    };
    auto unpack = [&](std::uint64_t key, std::vector<double>& sums) {
      for (std::size_t j = 0; j < kk; ++j) {
        sums[j] = static_cast<double>(key % radix) / 2.0;
        key /= radix;
      }
    };
    return convolve_and_tail<std::uint64_t, std::unordered_map<std::uint64_t, double>>(
        ranks, std::uint64_t{0}, add, unpack, observed, n, k, tie_term);
  }
  auto add = [](std::vector<int> key, const std::vector<int>& a) {
    for (std::size_t j = 0; j < key.size(); ++j) key[j] += a[j];
    return key;
  };
  auto unpack = [](const std::vector<int>& key, std::vector<double>& sums) {
    for (std::size_t j = 0; j < key.size(); ++j) sums[j] = key[j] / 2.0;
  };
  return convolve_and_tail<std::vector<int>, std::map<std::vector<int>, double>>(
      ranks, std::vector<int>(kk, 0), add, unpack, observed, n, k, tie_term);
}

}  // namespace

FriedmanResult friedman_test(const std::vector<std::vector<double>>& scores, PValueMethod method) {
  const std::size_t n = scores.size();
  if (n < 2) throw Error(ErrorKind::IncompleteDesign, "Friedman test needs at least 2 blocks");
  const std::size_t k = scores.front().size();
  if (k < 2) throw Error(ErrorKind::IncompleteDesign, "Friedman test needs at least 2 treatments");
  for (const auto& row : scores)
    if (row.size() != k) throw Error(ErrorKind::IncompleteDesign, "every block must score every treatment");

  std::vector<std::vector<double>> ranks;
  std::vector<double> rank_sums(k, 0.0);
  double tie_term = 0.0;
  for (const auto& row : scores) {
    ranks.push_back(midranks(row));
    for (std::size_t j = 0; j < k; ++j) rank_sums[j] += ranks.back()[j];
    tie_term += tie_term_of(row);
  }

  FriedmanResult r;
  r.df = k - 1;
  r.statistic = friedman_from_sums(rank_sums, double(n), double(k), tie_term);
  if (r.statistic <= 0.0) {
    r.p_value = 1.0;
    return r;
  }
  if (method == PValueMethod::ChiSquare) {
    r.p_value = boost::math::gamma_q(static_cast<double>(r.df) / 2.0, r.statistic / 2.0);
  } else {
    r.p_value = exact_p_value(ranks, r.statistic, double(n), double(k), tie_term);
  }
  return r;
}

FriedmanResult friedman_test(const FactorDesign& design, PValueMethod method) {
  return friedman_test(design.table(), method);
}

double sample_sd(const std::vector<double>& xs) {
  if (xs.size() < 2) throw Error(ErrorKind::InvalidArgument, "sample SD needs at least 2 values");
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double sigma_ratio(const std::vector<double>& factor_level_means, const std::vector<double>& round_scores) {
  const double noise = sample_sd(round_scores);
  if (noise == 0.0) throw Error(ErrorKind::ZeroNoise, "round-to-round SD is zero");
  return sample_sd(factor_level_means) / noise;
}

json matrix_report_json(const std::vector<UtilityMatrix>& ms) {
  json domains = json::array();
  for (const auto& m : ms) {
    json rows = json::array();
    for (const auto& t : m.targets()) {
      json cells = json::object();
      bool any = false;
      for (const auto& e : m.extractors()) {
        auto c = m.cell(e, t);
        cells[e] = c ? json(*c) : json(nullptr);
        any = any || c.has_value();
      }
      auto b = m.base(t);
      rows.push_back({{"target", t},
                      {"base", b ? json(*b) : json(nullptr)},
                      {"delta", cells},
                      {"te", any ? json(target_evolvability(m, t)) : json(nullptr)}});
    }
    json ee = json::object();
    for (const auto& e : m.extractors()) ee[e] = extraction_efficacy(m, e);
    domains.push_back({{"domain", m.domain()},
                       {"targets", m.targets()},
                       {"extractors", m.extractors()},
                       {"rows", rows},
                       {"ee", ee},
                       {"negative_transfer_rate", negative_transfer_rate(m)}});
  }
  return json{{"domains", domains},
              {"negative_transfer_rate", ms.empty() ? json(nullptr) : json(negative_transfer_rate(ms))}};
}

namespace {

std::string signed2(double v) {
  std::ostringstream os;
  const double r = std::round(v * 100.0) / 100.0;
  os << (r < 0 ? "-" : "+") << std::fixed << std::setprecision(2) << std::abs(r);
  return os.str();
}

std::string fixed2(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << v;
  return os.str();
}

std::string pad(const std::string& s, std::size_t width, bool left = false) {
  if (s.size() >= width) return s;
  return left ? s + std::string(width - s.size(), ' ') : std::string(width - s.size(), ' ') + s;
}

}  // namespace

std::string matrix_report_text(const std::vector<UtilityMatrix>& ms, bool color) {
  std::ostringstream os;
  std::size_t total_neg = 0, total_cells = 0;
  for (const auto& m : ms) {
    std::size_t name_w = 6;
    for (const auto& t : m.targets()) name_w = std::max(name_w, t.size());
    std::vector<std::size_t> col_w;
    for (const auto& e : m.extractors()) col_w.push_back(std::max<std::size_t>(7, e.size()));

    os << "Domain: " << m.domain() << "\n";
    os << pad("Target", name_w, true) << "  " << pad("Base", 7);
    for (std::size_t j = 0; j < col_w.size(); ++j) os << "  " << pad(m.extractors()[j], col_w[j]);
    os << "  " << pad("TE", 7) << "\n";

    for (const auto& t : m.targets()) {
      auto b = m.base(t);
      os << pad(t, name_w, true) << "  " << pad(b ? fixed2(*b) : "-", 7);
      bool any = false;
      for (std::size_t j = 0; j < col_w.size(); ++j) {
        auto c = m.cell(m.extractors()[j], t);
        std::string text = c ? signed2(*c) : "-";
        std::string cell = pad(text, col_w[j]);
        if (color && c && *c != 0.0) cell = (*c > 0 ? "\x1b[32m" : "\x1b[31m") + cell + "\x1b[0m";
        os << "  " << cell;
        any = any || c.has_value();
      }
      os << "  " << pad(any ? signed2(target_evolvability(m, t)) : "-", 7) << "\n";
    }
    os << pad("EE", name_w, true) << "  " << pad("", 7);
    for (std::size_t j = 0; j < col_w.size(); ++j)
      os << "  " << pad(signed2(extraction_efficacy(m, m.extractors()[j])), col_w[j]);
    os << "\n";

    std::size_t neg = 0;
    for (const auto& [key, d] : m.cells()) neg += d < 0.0 ? 1 : 0;
    total_neg += neg;
    total_cells += m.cell_count();
    os << "Negative transfer: " << neg << "/" << m.cell_count() << " ("
       << fixed2(100.0 * double(neg) / double(m.cell_count())) << "%)\n\n";
  }
  if (total_cells > 0)
    os << "Overall negative transfer: " << total_neg << "/" << total_cells << " ("
       << fixed2(100.0 * double(total_neg) / double(total_cells)) << "%)\n";
  return os.str();
}

}  // namespace skillcraft
