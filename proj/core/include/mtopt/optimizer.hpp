#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mtopt/models.hpp"
#include "mtopt/solvers.hpp"
#include "mtopt/umm.hpp"

namespace mtopt {

enum class OptKind { adam, adagrad, rmsprop, sgd };

std::string to_string(OptKind k);
OptKind opt_kind_from_string(const std::string& s);

struct OptimizerConfig {
  OptKind kind = OptKind::adam;
  double lr = 1e-3;
  double beta1 = 0.9;   // adam
  double beta2 = 0.999; // adam
  double beta = 0.9;    // adagrad/rmsprop accumulator decay, as printed
  double eps = 1e-8;
  bool bias_correct = false;         // off by default; ablation flag
  bool moment_update_before = false; // default: moments committed after the step
};

// Moment state over one flattened parameter group. The update column uses
// the inline form (beta1 m + (1-beta1) g) / (sqrt(beta2 v + (1-beta2) g^2) + eps)
// for adam and g / (sqrt(beta G + (1-beta) g^2) + eps) for adagrad/rmsprop,
// evaluated on the current (frozen) moments.
class OptimizerState {
 public:
  OptimizerState() = default;
  OptimizerState(OptimizerConfig cfg, std::int64_t dim);

  const OptimizerConfig& config() const { return cfg_; }
  std::int64_t dim() const { return dim_; }
  std::int64_t step_count() const { return step_count_; }

  // Hypothetical update for this gradient with moments frozen; const.
  std::vector<double> update_column(std::span<const double> grad) const;

  // theta -= lr * update(grad); moments committed with grad before or after
  // the parameter write per cfg.moment_update_before.
  void plain_step(std::span<double> theta, std::span<const double> grad);

  // Commits moments with the supplied (combined) gradient and advances the
  // step counter.
  void commit_moments(std::span<const double> grad);

  const std::vector<double>& m() const { return m_; }
  const std::vector<double>& v() const { return v_; }
  const std::vector<double>& accum() const { return accum_; }

 private:
  OptimizerConfig cfg_;
  std::int64_t dim_ = 0;
  std::int64_t step_count_ = 0;
  std::vector<double> m_, v_, accum_;
};

// Columns of the d x n update matrix D, one hypothetical update per task,
// all computed on the same frozen moments. Never mutates state.
std::vector<std::vector<double>> compute_task_updates(
    const OptimizerState& state, const std::vector<std::vector<double>>& task_grads);

struct PubStepConfig {
  int solve_every = 10;
  SolverConfig solver;
  UmmConfig umm;
};

struct PubStepResult {
  WeightSolution solution;           // weights used this step
  bool solved_this_step = false;
  std::vector<double> joint_update;  // D alpha
  std::vector<double> combined_grad; // sum_i alpha_i g_i
};

// The update-balancing stepper: builds D from UMM-transformed per-task
// updates, solves (or reuses) the task weights, applies
// theta_shared -= lr * D alpha, commits shared moments with the combined
// gradient, and steps task-specific parameters with their own gradients.
class PubEngine {
 public:
  PubEngine(OptimizerConfig opt, PubStepConfig cfg, std::int64_t shared_dim,
            const std::vector<std::int64_t>& task_dims);

  PubStepResult step(ParamSet& params,
                     const std::vector<std::vector<double>>& shared_task_grads,
                     const std::vector<std::vector<double>>& task_grads);

  const OptimizerState& shared_state() const { return shared_; }
  OptimizerState& shared_state() { return shared_; }
  OptimizerState& task_state(int i) { return per_task_[static_cast<std::size_t>(i)]; }
  const std::vector<double>& cached_alpha() const { return cached_.alpha; }
  std::int64_t step_count() const { return step_count_; }

 private:
  OptimizerConfig opt_;
  PubStepConfig cfg_;
  OptimizerState shared_;
  std::vector<OptimizerState> per_task_;
  UmmState umm_;
  WeightSolution cached_;
  std::int64_t step_count_ = 0;
};

}  // namespace mtopt
