#pragma once

#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace skillcraft {

/// One evaluation run. extractor == nullopt marks a no-skill baseline run.
struct RunRecord {
  std::optional<std::string> extractor;
  std::string target;
  std::string domain;
  int run_index = 0;
  double score = 0.0;  // percentage, [0, 100]
};

void to_json(nlohmann::json& j, const RunRecord& r);
void from_json(const nlohmann::json& j, RunRecord& r);
std::vector<RunRecord> read_runs_jsonl(std::istream& in);

/// Δ = mean(skill-run scores) − mean(baseline scores), percentage points.
double delta(const std::vector<RunRecord>& records, const std::string& extractor, const std::string& target,
             const std::string& domain);

/// Δ cells of one domain. Row/column order is first appearance.
class UtilityMatrix {
 public:
  explicit UtilityMatrix(std::string domain = {}) : domain_(std::move(domain)) {}

  void set_base(const std::string& target, double mean_score);
  /// Requires a base entry for the target.
  void set_delta(const std::string& extractor, const std::string& target, double delta);

  const std::string& domain() const noexcept { return domain_; }
  const std::vector<std::string>& targets() const noexcept { return targets_; }
  const std::vector<std::string>& extractors() const noexcept { return extractors_; }
  std::optional<double> base(const std::string& target) const;
  std::optional<double> cell(const std::string& extractor, const std::string& target) const;
  std::size_t cell_count() const noexcept { return delta_.size(); }
  const std::map<std::pair<std::string, std::string>, double>& cells() const noexcept { return delta_; }

 private:
  std::string domain_;
  std::vector<std::string> targets_;
  std::vector<std::string> extractors_;
  std::map<std::string, double> base_;
  std::map<std::pair<std::string, std::string>, double> delta_;  // (extractor, target)
};

struct MissingCell {
  std::string domain;
  std::string extractor;
  std::string target;
  std::string reason;
};

struct MatrixBuild {
  std::vector<UtilityMatrix> matrices;  // one per domain, first-appearance order
  std::vector<MissingCell> missing;
};

/// Groups run records by domain and computes every (extractor, target) cell
/// that has both skill and baseline runs; the rest are reported as missing.
MatrixBuild build_matrices(const std::vector<RunRecord>& records);

/// EE: mean Δ over the targets an extractor was evaluated on.
double extraction_efficacy(const UtilityMatrix& m, const std::string& extractor);
/// TE: mean Δ over the extractors applied to a target.
double target_evolvability(const UtilityMatrix& m, const std::string& target);
/// Fraction of cells with Δ < 0.
double negative_transfer_rate(const UtilityMatrix& m);
double negative_transfer_rate(const std::vector<UtilityMatrix>& ms);

/// Complete block × treatment design (blocks are tasks or rounds).
struct FactorDesign {
  std::vector<std::string> blocks;
  std::vector<std::string> treatments;
  std::map<std::pair<std::string, std::string>, double> observations;  // (block, treatment)

  /// Row-major scores[block][treatment]. Throws IncompleteDesign on gaps.
  std::vector<std::vector<double>> table() const;
};

enum class PValueMethod { ChiSquare, Exact };

struct FriedmanResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t df = 0;
};

/// Within-block mid-ranks; 1 = smallest score.
std::vector<double> midranks(const std::vector<double>& scores);

/// Friedman rank test with the tie-corrected statistic. ChiSquare uses the
/// (k−1)-df upper tail; Exact enumerates the within-block permutation
/// distribution and throws InvalidArgument when that distribution grows past
/// an internal state limit.
FriedmanResult friedman_test(const FactorDesign& design, PValueMethod method = PValueMethod::ChiSquare);
FriedmanResult friedman_test(const std::vector<std::vector<double>>& scores,
                             PValueMethod method = PValueMethod::ChiSquare);

/// Sample (n−1) standard deviation.
double sample_sd(const std::vector<double>& xs);

/// SD(level means) / SD(round scores). Throws ZeroNoise when the round SD is 0.
double sigma_ratio(const std::vector<double>& factor_level_means, const std::vector<double>& round_scores);

/// Table-1 style document: base, Δ cells, EE row, TE column, negative-transfer rate.
nlohmann::json matrix_report_json(const std::vector<UtilityMatrix>& ms);

/// Plain-text table; Δ cells wrapped in ANSI green/red when `color` is set.
std::string matrix_report_text(const std::vector<UtilityMatrix>& ms, bool color);

}  // namespace skillcraft
