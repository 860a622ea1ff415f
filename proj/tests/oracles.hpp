// Test-only oracles. Each is an independent route to a value the production
// code computes some other way; none of them share solver code with the
// library paths they check.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mtopt/rng.hpp"

namespace mtopt::oracle {

// Damped Newton on F(alpha) = G alpha - 1/alpha with Jacobian
// G + diag(1/alpha^2); converges quadratically for PD G from the all-ones
// start. G is n x n row-major; no ridge is added here.
std::vector<double> newton_bargaining(const std::vector<double>& g, int n,
                                      int max_iter = 200, double ftol = 1e-13);

// O(k^2) pair-counting AUC with ties worth 0.5.
double auc_pair_count(std::span<const double> scores, std::span<const double> labels);

// Brute-force min of |a v1 + (1-a) v2 ... | over the 2-simplex grid (n = 2)
// or the 3-point simplex grid (n = 3) at the given step; returns the weights.
std::vector<double> min_norm_grid(const std::vector<std::vector<double>>& vectors,
                                  double step);

// Brute-force CAGrad dual objective over the 2-simplex at the given
// resolution; returns the simplex weights minimizing
// (sum a_i g_i) . g0 + c |g0| * |sum a_i g_i|.
std::vector<double> cagrad_dual_grid(const std::vector<std::vector<double>>& grads,
                                     double c, double step);

// Random PSD Gram matrix with eigenvalues in [lo, hi] (row-major, n x n);
// rejects instances whose all-ones start would be infeasible for the
// bargaining domain (min_i (G 1)_i <= margin).
std::vector<double> random_feasible_psd(int n, Rng& rng, double lo = 0.5,
                                        double hi = 3.0, double margin = 0.05);

}  // namespace mtopt::oracle
