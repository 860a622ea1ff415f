#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mtopt {

// One training step of diagnostics; the raw material of the statistical
// pipeline. Written as one JSONL line per step.
struct TraceRecord {
  int step = 0;
  std::vector<double> task_losses;
  std::vector<double> alpha;
  double sim_task = 0.0;
  double sim_share = 0.0;
  std::vector<double> grad_norm_share;
  double update_norm_share = 0.0;
};

struct ExperimentSummary {
  std::string dataset_id;
  std::string model_kind;
  std::string method;
  std::uint64_t seed = 0;
  double avg_auc = 0.0;
  double mean_sim_task = 0.0;
  double mean_sim_share = 0.0;
  double diff = 0.0;
};

// u.v / (|u||v|); 0 when either norm is below 1e-12.
double cosine(std::span<const double> u, std::span<const double> v);

// 2|a - b| / |a + b|; +inf when the denominator vanishes.
double diff_metric(double sim_task, double sim_share);

// Ordered (x, y) indicator pairs comparing methods within each
// (dataset, model) group: x = 1 iff avg_auc_i > avg_auc_j, y likewise for
// diff. Ties in either metric drop the pair.
struct PairwiseResult {
  std::vector<std::pair<int, int>> pairs;
  int dropped = 0;
};
PairwiseResult pairwise_indicators(const std::vector<ExperimentSummary>& summaries);

enum class PBucket { ns, p05, p01, p001 };
std::string to_string(PBucket b);

struct Chi2Result {
  double chi2 = 0.0;
  PBucket bucket = PBucket::ns;
};
// Pearson chi-square without continuity correction on a 2x2 table; the
// bucket uses the df=1 thresholds 3.841 / 6.635 / 10.828.
Chi2Result chi_square_2x2(const std::array<std::array<double, 2>, 2>& table);

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  PBucket bucket = PBucket::ns;
};
// Welch's two-sample t statistic with Welch-Satterthwaite df; two-sided
// p bucketed through the t CDF.
TTestResult t_test_independent(std::span<const double> a, std::span<const double> b);

// Rank-statistic AUC with ties counted 0.5. Labels must be 0/1 with both
// classes present. O(k log k).
double auc(std::span<const double> scores, std::span<const double> labels);

// Task-weighted average relative improvement versus single-task baselines,
// in percent; negative is better. lower_better[p] = 1 when a lower value of
// criterion p is better; task_of[p] groups criteria into tasks.
double delta_m(std::span<const double> method_metrics,
               std::span<const double> stl_metrics,
               std::span<const int> lower_better, std::span<const int> task_of);

// Regularized incomplete beta function I_x(a, b); exposed for tests.
double incomplete_beta(double a, double b, double x);

}  // namespace mtopt
