#pragma once

#include <span>
#include <string>
#include <vector>

#include "mtopt/rng.hpp"

namespace mtopt {

enum class GramSource { updates, gradients };

// Symmetric n x n matrix of pairwise inner products of per-task columns.
struct GramMatrix {
  int n = 0;
  std::vector<double> g;  // row-major, n*n
  GramSource source = GramSource::updates;

  double at(int i, int j) const { return g[static_cast<std::size_t>(i) * n + j]; }
  double trace() const;

  static GramMatrix from_columns(const std::vector<std::vector<double>>& cols,
                                 GramSource source);
};

enum class SolveStatus { converged, max_iter, fallback_used };

std::string to_string(SolveStatus s);

// Task-weight vector with solve diagnostics. residual is the max-norm of
// (G alpha) o alpha - 1 on the ridge-regularized Gram matrix.
struct WeightSolution {
  std::vector<double> alpha;
  double residual = 0.0;
  int iterations = 0;
  SolveStatus status = SolveStatus::converged;
  bool degenerate = false;
};

enum class FallbackKind { ls, min_norm };

struct SolverConfig {
  int ccp_max_iter = 200;
  int inner_max_iter = 50;
  double tol = 1e-3;
  double ridge_rel = 1e-8;
  FallbackKind fallback = FallbackKind::ls;
  bool normalize_sum_n = false;
};

// Solves G alpha = 1/alpha (elementwise) for alpha > 0 by a concave-convex
// procedure: the log objective is linearized at the current iterate and the
// resulting convex subproblem is handled with a log-barrier gradient method.
// G is regularized as G + ridge_rel * (trace(G)/n) * I before solving.
// Infeasible all-ones starts (some (G*1)_i <= 0) return fallback weights.
WeightSolution solve_bargaining(const GramMatrix& gram, const SolverConfig& cfg = {});

// Linear scalarization: all-ones weights.
WeightSolution solve_ls(int n);

// MGDA: min-norm point in the convex hull of the task vectors. Two tasks use
// the closed form; n >= 3 uses Frank-Wolfe on the simplex.
WeightSolution solve_min_norm(const std::vector<std::vector<double>>& vectors);

// Frank-Wolfe on the simplex for min alpha' K alpha, exposed so the closed
// form and the iterative path can be cross-checked at any n.
std::vector<double> min_norm_frank_wolfe(const GramMatrix& k, int max_iter = 100,
                                         double gap_tol = 1e-6);

// PCGrad surgery. Task order for the projections is shuffled per task with
// rng; each projection uses the original conflicting gradient.
std::vector<std::vector<double>> pcgrad(const std::vector<std::vector<double>>& grads,
                                        Rng& rng);

// CAGrad combined direction; c = 0 returns the mean gradient exactly.
std::vector<double> cagrad(const std::vector<std::vector<double>>& grads, double c);

// Simplex weights of the CAGrad dual, exposed for oracle comparisons.
std::vector<double> cagrad_dual_weights(const GramMatrix& k, double c,
                                        int max_iter = 200, double step = 0.1);

// IMTL-G: weights making the aggregate have equal scalar projection onto each
// unit task gradient, normalized to sum 1. Singular systems fall back to
// uniform weights with status fallback_used.
WeightSolution imtl_g(const std::vector<std::vector<double>>& grads);

// Uncertainty weighting: loss = sum_i exp(-s_i) L_i + s_i.
struct UncertaintyResult {
  double weighted_loss = 0.0;
  std::vector<double> weights;  // exp(-s_i)
  std::vector<double> s_grad;   // d/ds_i = -exp(-s_i) L_i + 1
};
UncertaintyResult uncertainty_weights(std::span<const double> s,
                                      std::span<const double> losses);

// sum_i alpha_i * vectors_i
std::vector<double> combine(const std::vector<std::vector<double>>& vectors,
                            std::span<const double> alpha);

}  // namespace mtopt
