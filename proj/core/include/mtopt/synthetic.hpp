#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace mtopt {

// Two-task CTR / CTCVR generator. The label processes share a feature space
// with correlated weight vectors; conversion requires a click, so the CTCVR
// positives are a subset of the CTR positives.
struct RankingDatasetConfig {
  int n_samples = 50000;
  int dim = 16;
  double rho = -0.3;  // <w_ctr, w_cv>
  double click_bias = -1.0;
  double conv_bias = -2.5;
  std::uint64_t seed = 1;
};

struct RankingDataset {
  int n = 0;
  int dim = 0;
  std::vector<double> features;  // n x dim, row-major
  std::vector<double> y_ctr;
  std::vector<double> y_ctcvr;

  // generator self-report
  double rate_ctr = 0.0;
  double rate_ctcvr = 0.0;
  // BCE of the best constant predictor per task (binary entropy of the rate);
  // a zero-logit model scores log(2) on every task, so the constant-predictor
  // entropy is the meaningful per-task difficulty proxy.
  double base_bce_ctr = 0.0;
  double base_bce_ctcvr = 0.0;
  std::vector<double> w_ctr, w_cv;
};

RankingDataset gen_ranking(const RankingDatasetConfig& cfg);

void write_ranking_csv(const RankingDataset& ds, const std::string& path);
RankingDataset read_ranking_csv(const std::string& path);

// Analytically tractable two-task toy: L1 = 0.5 |t - c1|^2,
// L2 = (kappa/2) |t - c2|^2. The Pareto front is the segment [c1, c2].
struct ToyConfig {
  std::array<double, 2> c1{-1.0, 0.0};
  std::array<double, 2> c2{1.0, 0.0};
  double kappa = 1.0;
  std::vector<std::array<double, 2>> init_points{
      {-2.0, 1.2}, {2.0, 1.0}, {0.0, -1.2}, {-1.0, -0.8}, {1.2, 0.9}};
  int steps = 2000;
};

struct ToyEval {
  double l1 = 0.0;
  double l2 = 0.0;
  std::array<double, 2> g1{};
  std::array<double, 2> g2{};
};

ToyEval toy_losses(const std::array<double, 2>& theta, const ToyConfig& cfg);

double toy_distance_to_front(const std::array<double, 2>& theta, const ToyConfig& cfg);

}  // namespace mtopt
