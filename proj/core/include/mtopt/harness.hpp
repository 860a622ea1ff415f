#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mtopt/analysis.hpp"
#include "mtopt/models.hpp"
#include "mtopt/optimizer.hpp"
#include "mtopt/synthetic.hpp"

namespace mtopt {

enum class Method { ls, pub, mgda, pcgrad, cagrad, imtl_g, nashmtl, uncertainty };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

// One training cell: dataset + model + optimizer + multi-task method.
struct TrainConfig {
  RankingDatasetConfig data;
  ModelSpec model;
  OptimizerConfig optim;
  Method method = Method::ls;
  UmmConfig umm;
  SolverConfig solver;
  int solve_every = 10;
  double cagrad_c = 0.5;
  double weight_decay = 0.0;
  int epochs = 6;
  int batch_size = 512;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::string output_dir = "out";
};

TrainConfig train_config_from_json_file(const std::string& path);
TrainConfig train_config_from_json_text(const std::string& text);
std::string train_config_to_json(const TrainConfig& cfg);

struct EpochAuc {
  std::vector<double> per_task;
  double average = 0.0;
};

struct RunResult {
  std::string status;  // "ok" or "diverged"
  int diverged_step = -1;
  std::vector<EpochAuc> val_auc;  // one entry per completed epoch
  int best_epoch = -1;            // maximizes average AUC, earliest on ties
  int steps_per_epoch = 0;
  ExperimentSummary summary;
  std::string trace_path;
};

// Trains one cell; writes trace.jsonl and result.json under out_dir.
RunResult run_training(const TrainConfig& cfg, std::uint64_t seed,
                       const std::string& out_dir);

// Desk-scale base cell for the default grid: smaller dataset and model so
// the full 144-cell sweep stays in the minutes range.
TrainConfig default_grid_base();

// Grid of methods x model kinds x dataset seeds x run seeds over a base
// config. Cells run independently on a worker pool; failures are recorded
// and do not stop the grid.
struct GridSpec {
  TrainConfig base = default_grid_base();
  std::vector<Method> methods{Method::ls, Method::mgda, Method::imtl_g, Method::nashmtl};
  std::vector<ModelKind> models{ModelKind::shared_bottom, ModelKind::mmoe, ModelKind::ple};
  std::vector<std::uint64_t> dataset_seeds{101, 102, 103, 104};
  std::vector<std::uint64_t> run_seeds{1, 2, 3};
};

GridSpec grid_spec_from_json_file(const std::string& path);

struct GridOutcome {
  int cells_total = 0;
  int cells_failed = 0;
  std::string report_json_path;
  std::string report_csv_path;
};

GridOutcome run_grid(const GridSpec& spec, const std::string& out_dir, int threads);

// Rebuilds report.json / report.csv purely from the per-cell files in dir.
// Called by run_grid for the online report, so a later offline call is
// byte-identical.
GridOutcome analyze_grid(const std::string& dir);

// Toy trajectory runner.
struct ToyRunConfig {
  ToyConfig toy;
  Method method = Method::pub;
  OptimizerConfig optim;
  UmmConfig umm;
  SolverConfig solver;
  int solve_every = 1;
  double cagrad_c = 0.5;
  std::uint64_t seed = 7;
};

struct ToyTrajectory {
  std::array<double, 2> init{};
  std::vector<std::array<double, 4>> points;  // x, y, l1, l2 per step
  std::array<double, 2> final_theta{};
  double final_distance_to_front = 0.0;
};

// Runs every init point; writes trajectory_<k>.csv plus toy_result.json
// under out_dir when out_dir is nonempty.
std::vector<ToyTrajectory> run_toy(const ToyRunConfig& cfg, const std::string& out_dir);

}  // namespace mtopt
