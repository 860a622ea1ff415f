#include "mtopt/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mtopt/errors.hpp"
#include "mtopt/linalg.hpp"

namespace mtopt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_same_length(const std::vector<std::vector<double>>& vs, const char* who) {
  for (const auto& v : vs)
    if (v.size() != vs.front().size())
      throw ContractError(std::string(who) + ": vectors differ in length");
}

}  // namespace

double GramMatrix::trace() const {
  double t = 0.0;
  for (int i = 0; i < n; ++i) t += at(i, i);
  return t;
}

GramMatrix GramMatrix::from_columns(const std::vector<std::vector<double>>& cols,
                                    GramSource source) {
  const int n = static_cast<int>(cols.size());
  if (n == 0) throw ContractError("GramMatrix: no columns");
  check_same_length(cols, "GramMatrix");
  GramMatrix g;
  g.n = n;
  g.source = source;
  g.g.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      const double v = linalg::dot(cols[i], cols[j]);
      g.g[static_cast<std::size_t>(i) * n + j] = v;
      g.g[static_cast<std::size_t>(j) * n + i] = v;
    }
  return g;
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::fallback_used: return "fallback_used";
  }
  return "unknown";
}

namespace {

struct BargainSystem {
  int n;
  std::vector<double> g;  // ridged Gram, row-major

  std::vector<double> matvec(const std::vector<double>& x) const {
    std::vector<double> y(n, 0.0);
    for (int i = 0; i < n; ++i) {
      const double* row = &g[static_cast<std::size_t>(i) * n];
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += row[j] * x[j];
      y[i] = s;
    }
    return y;
  }

  double residual(const std::vector<double>& a, const std::vector<double>& w) const {
    double r = 0.0;
    for (int i = 0; i < n; ++i) r = std::max(r, std::abs(a[i] * w[i] - 1.0));
    return r;
  }
};

// Minimize psi(x) = c.x - mu * sum_i log(phi_i(x)) with
// phi_i(x) = log(x_i) + log((Gx)_i), over the open set {phi > 0}, starting
// from a strictly feasible x. Gradient descent with Barzilai-Borwein initial
// steps and Armijo backtracking; candidates leaving the domain (x_i <= 0,
// (Gx)_i <= 0, or phi_i <= 0) are rejected by the line search, which is the
// damping rule for iterates approaching the (Gx)_i boundary.
void barrier_descent(const BargainSystem& sys, const std::vector<double>& c,
                     double mu, std::vector<double>& x, int max_iter) {
  const int n = sys.n;

  auto eval = [&](const std::vector<double>& y, std::vector<double>& w,
                  std::vector<double>& phi) -> double {
    w = sys.matvec(y);
    double v = 0.0;
    for (int i = 0; i < n; ++i) {
      if (y[i] <= 0.0 || w[i] <= 0.0) return kInf;
      phi[i] = std::log(y[i]) + std::log(w[i]);
      if (phi[i] <= 0.0) return kInf;
      v += c[i] * y[i] - mu * std::log(phi[i]);
    }
    return v;
  };

  auto gradient = [&](const std::vector<double>& y, const std::vector<double>& w,
                      const std::vector<double>& phi, std::vector<double>& g) {
    std::vector<double> rw(n);
    for (int i = 0; i < n; ++i) rw[i] = 1.0 / (phi[i] * w[i]);
    const std::vector<double> grw = sys.matvec(rw);
    for (int i = 0; i < n; ++i)
      g[i] = c[i] - mu * (1.0 / (phi[i] * y[i]) + grw[i]);
  };

  std::vector<double> w(n), phi(n), g(n), xprev, gprev;
  std::vector<double> cand(n), wc(n), phic(n);
  double f = eval(x, w, phi);
  if (!std::isfinite(f)) return;
  gradient(x, w, phi, g);
  const double gtol = 1e-12 * (1.0 + linalg::linf_norm(c));
  double step = 1.0;

  for (int it = 0; it < max_iter; ++it) {
    if (linalg::linf_norm(g) <= gtol) break;
    if (!xprev.empty()) {
      double sy = 0.0, yy = 0.0;
      for (int i = 0; i < n; ++i) {
        const double si = x[i] - xprev[i];
        const double yi = g[i] - gprev[i];
        sy += si * yi;
        yy += yi * yi;
      }
      if (sy > 0.0 && yy > 0.0) step = sy / yy;
    }
    step = std::clamp(step, 1e-18, 1e18);

    const double slope = -linalg::dot(g, g);
    double t = step;
    double fc = kInf;
    bool accepted = false;
    for (int bt = 0; bt < 64; ++bt) {
      for (int i = 0; i < n; ++i) cand[i] = x[i] - t * g[i];
      fc = eval(cand, wc, phic);
      if (fc <= f + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
    xprev = x;
    gprev = g;
    x = cand;
    w = wc;
    phi = phic;
    f = fc;
    gradient(x, w, phi, g);
    step = 2.0 * t;
  }
}

WeightSolution bargaining_fallback(const GramMatrix& gram, const BargainSystem& sys,
                                   const SolverConfig& cfg) {
  WeightSolution sol;
  sol.status = SolveStatus::fallback_used;
  sol.iterations = 0;
  if (cfg.fallback == FallbackKind::ls) {
    sol.alpha.assign(gram.n, 1.0);
  } else {
    sol.alpha = min_norm_frank_wolfe(gram);
  }
  sol.residual = sys.residual(sol.alpha, sys.matvec(sol.alpha));
  return sol;
}

}  // namespace

WeightSolution solve_bargaining(const GramMatrix& gram, const SolverConfig& cfg) {
  const int n = gram.n;
  if (n <= 0) throw ContractError("solve_bargaining: empty Gram matrix");
  if (gram.g.size() != static_cast<std::size_t>(n) * n)
    throw ContractError("solve_bargaining: Gram storage does not match n");
  for (double v : gram.g)
    if (!std::isfinite(v)) throw NumericError("solve_bargaining: non-finite Gram entry");
  if (cfg.tol <= 0.0 || cfg.ccp_max_iter < 1)
    throw ConfigError("solve_bargaining: tol must be > 0 and ccp_max_iter >= 1");

  BargainSystem sys{n, gram.g};
  const double lam = cfg.ridge_rel * gram.trace() / n;
  for (int i = 0; i < n; ++i) sys.g[static_cast<std::size_t>(i) * n + i] += lam;

  WeightSolution sol;
  sol.alpha.assign(n, 1.0);
  std::vector<double> w = sys.matvec(sol.alpha);
  if (*std::min_element(w.begin(), w.end()) <= 0.0)
    return bargaining_fallback(gram, sys, cfg);

  // Scaling alpha by t shifts every phi_i by 2 log t, so strict feasibility
  // of the all-ones start is one rescale away whenever (G*1) > 0.
  double phimin = kInf;
  for (int i = 0; i < n; ++i) phimin = std::min(phimin, std::log(w[i]));
  const double margin = 0.1;
  if (phimin < margin) {
    const double t = std::exp(0.5 * (margin - phimin));
    for (int i = 0; i < n; ++i) sol.alpha[i] *= t;
  }

  double mu = 0.1;
  const double mu_floor = std::max(0.05 * cfg.tol, 1e-13);
  sol.status = SolveStatus::max_iter;
  sol.iterations = cfg.ccp_max_iter;

  std::vector<double> c(n), winv(n);
  for (int outer = 0; outer < cfg.ccp_max_iter; ++outer) {
    w = sys.matvec(sol.alpha);
    if (sys.residual(sol.alpha, w) <= 0.5 * cfg.tol) {
      sol.status = SolveStatus::converged;
      sol.iterations = outer;
      break;
    }
    for (int i = 0; i < n; ++i) winv[i] = 1.0 / w[i];
    const std::vector<double> gw = sys.matvec(winv);
    for (int i = 0; i < n; ++i) c[i] = 1.0 / sol.alpha[i] + gw[i];
    barrier_descent(sys, c, mu, sol.alpha, cfg.inner_max_iter);
    mu = std::max(mu_floor, 0.5 * mu);
  }

  sol.residual = sys.residual(sol.alpha, sys.matvec(sol.alpha));
  if (cfg.normalize_sum_n) {
    const double s = std::accumulate(sol.alpha.begin(), sol.alpha.end(), 0.0);
    if (s > 0.0)
      for (double& a : sol.alpha) a *= n / s;
  }
  return sol;
}

WeightSolution solve_ls(int n) {
  if (n < 1) throw ContractError("solve_ls: n must be >= 1");
  WeightSolution sol;
  sol.alpha.assign(n, 1.0);
  sol.status = SolveStatus::converged;
  return sol;
}

std::vector<double> min_norm_frank_wolfe(const GramMatrix& k, int max_iter,
                                         double gap_tol) {
  // Frank-Wolfe with away steps and exact line search; the away direction
  // avoids the zigzag stall of the vanilla iteration near faces.
  const int n = k.n;
  std::vector<double> alpha(n, 1.0 / n);
  std::vector<double> ka(n), d(n);
  for (int it = 0; it < max_iter; ++it) {
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += k.at(i, j) * alpha[j];
      ka[i] = s;
    }
    const double qa = linalg::dot(alpha, ka);  // grad = 2 ka
    int fw = 0, away = -1;
    for (int i = 1; i < n; ++i)
      if (ka[i] < ka[fw]) fw = i;
    for (int i = 0; i < n; ++i)
      if (alpha[i] > 0.0 && (away < 0 || ka[i] > ka[away])) away = i;
    const double fw_gap = 2.0 * (qa - ka[fw]);
    if (fw_gap < gap_tol) break;
    const double away_gap = 2.0 * (ka[away] - qa);

    double gamma_max;
    if (fw_gap >= away_gap) {
      for (int i = 0; i < n; ++i) d[i] = (i == fw ? 1.0 : 0.0) - alpha[i];
      gamma_max = 1.0;
    } else {
      for (int i = 0; i < n; ++i) d[i] = alpha[i] - (i == away ? 1.0 : 0.0);
      gamma_max = alpha[away] < 1.0 ? alpha[away] / (1.0 - alpha[away]) : 1e16;
    }
    double dkd = 0.0, dka = 0.0;
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += k.at(i, j) * d[j];
      dkd += d[i] * s;
      dka += d[i] * ka[i];
    }
    if (dkd <= 0.0) break;
    const double gamma = std::clamp(-dka / dkd, 0.0, gamma_max);
    if (gamma <= 0.0) break;
    for (int i = 0; i < n; ++i) alpha[i] = std::max(0.0, alpha[i] + gamma * d[i]);
    double sum = 0.0;
    for (double a : alpha) sum += a;
    for (double& a : alpha) a /= sum;
  }
  return alpha;
}

WeightSolution solve_min_norm(const std::vector<std::vector<double>>& vectors) {
  const int n = static_cast<int>(vectors.size());
  if (n < 1) throw ContractError("solve_min_norm: need at least one vector");
  check_same_length(vectors, "solve_min_norm");

  WeightSolution sol;
  sol.status = SolveStatus::converged;
  double maxnorm = 0.0;
  for (const auto& v : vectors) maxnorm = std::max(maxnorm, linalg::l2_norm(v));
  if (maxnorm == 0.0) {
    sol.alpha.assign(n, 1.0 / n);
    sol.degenerate = true;
    return sol;
  }

  if (n == 1) {
    sol.alpha = {1.0};
    return sol;
  }
  if (n == 2) {
    const auto& v1 = vectors[0];
    const auto& v2 = vectors[1];
    std::vector<double> diff(v1.size());
    for (std::size_t i = 0; i < v1.size(); ++i) diff[i] = v1[i] - v2[i];
    const double denom = linalg::dot(diff, diff);
    double gamma = 0.5;
    if (denom > 1e-24 * maxnorm * maxnorm) {
      double num = 0.0;
      for (std::size_t i = 0; i < v1.size(); ++i) num += (v2[i] - v1[i]) * v2[i];
      gamma = std::clamp(num / denom, 0.0, 1.0);
    }
    sol.alpha = {gamma, 1.0 - gamma};
    return sol;
  }
  sol.alpha = min_norm_frank_wolfe(GramMatrix::from_columns(vectors, GramSource::gradients));
  return sol;
}

std::vector<std::vector<double>> pcgrad(const std::vector<std::vector<double>>& grads,
                                        Rng& rng) {
  const int n = static_cast<int>(grads.size());
  if (n < 2) throw ContractError("pcgrad: need at least two gradients");
  check_same_length(grads, "pcgrad");

  std::vector<std::vector<double>> out = grads;
  std::vector<double> sqnorm(n);
  for (int j = 0; j < n; ++j) sqnorm[j] = linalg::dot(grads[j], grads[j]);

  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) {
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    for (int j : order) {
      if (j == i) continue;
      if (sqnorm[j] == 0.0) continue;
      const double d = linalg::dot(out[i], grads[j]);
      if (d < 0.0)
        linalg::axpy(-d / sqnorm[j], grads[j], out[i]);
    }
  }
  return out;
}

std::vector<double> cagrad_dual_weights(const GramMatrix& k, double c, int max_iter,
                                        double step) {
  const int n = k.n;
  double sum_all = 0.0;
  std::vector<double> b(n, 0.0);  // gradient of the linear term: K * 1 / n
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      sum_all += k.at(i, j);
      b[i] += k.at(i, j);
    }
  for (double& v : b) v /= n;
  const double phi = c * std::sqrt(std::max(sum_all, 0.0)) / n;

  auto objective = [&](const std::vector<double>& a) {
    double lin = 0.0, quad = 0.0;
    for (int i = 0; i < n; ++i) {
      lin += b[i] * a[i];
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += k.at(i, j) * a[j];
      quad += a[i] * s;
    }
    return lin + phi * std::sqrt(std::max(quad, 0.0));
  };

  // projected gradient: step toward project(alpha - step * grad), with an
  // exact 1-d line search along the feasible segment (the fixed step alone
  // stalls short of the oracle tolerance on ill-scaled instances)
  std::vector<double> alpha(n, 1.0 / n);
  std::vector<double> ka(n), g(n), cand(n);
  for (int it = 0; it < max_iter; ++it) {
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += k.at(i, j) * alpha[j];
      ka[i] = s;
    }
    const double q = std::sqrt(std::max(linalg::dot(alpha, ka), 0.0));
    for (int i = 0; i < n; ++i)
      g[i] = b[i] + (q > 1e-12 ? phi * ka[i] / q : 0.0);
    for (int i = 0; i < n; ++i) cand[i] = alpha[i] - step * g[i];
    const std::vector<double> target = linalg::project_to_simplex(cand);
    std::vector<double> dir(n);
    double dmax = 0.0;
    for (int i = 0; i < n; ++i) {
      dir[i] = target[i] - alpha[i];
      dmax = std::max(dmax, std::abs(dir[i]));
    }
    if (dmax < 1e-14) break;
    // dir sums to zero, so the ray stays on the simplex until a coordinate
    // hits zero; search the whole feasible segment, not just [alpha, target]
    double gamma_bound = 1e18;
    for (int i = 0; i < n; ++i)
      if (dir[i] < 0.0) gamma_bound = std::min(gamma_bound, alpha[i] / -dir[i]);
    double lo = 0.0, hi = std::max(1.0, gamma_bound);
    for (int ls = 0; ls < 80; ++ls) {
      const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
      for (int i = 0; i < n; ++i) cand[i] = std::max(0.0, alpha[i] + m1 * dir[i]);
      const double f1 = objective(cand);
      for (int i = 0; i < n; ++i) cand[i] = std::max(0.0, alpha[i] + m2 * dir[i]);
      const double f2 = objective(cand);
      if (f1 < f2) hi = m2;
      else lo = m1;
    }
    const double gamma = std::min(0.5 * (lo + hi), gamma_bound);
    for (int i = 0; i < n; ++i) alpha[i] = std::max(0.0, alpha[i] + gamma * dir[i]);
  }
  return alpha;
}

std::vector<double> cagrad(const std::vector<std::vector<double>>& grads, double c) {
  if (c < 0.0 || c >= 1.0) throw ConfigError("cagrad: c must lie in [0, 1)");
  const int n = static_cast<int>(grads.size());
  if (n < 1) throw ContractError("cagrad: need at least one gradient");
  check_same_length(grads, "cagrad");

  const std::size_t d = grads.front().size();
  std::vector<double> mean(d, 0.0);
  for (const auto& g : grads) linalg::axpy(1.0 / n, g, mean);
  if (c == 0.0) return mean;

  const GramMatrix k = GramMatrix::from_columns(grads, GramSource::gradients);
  const std::vector<double> alpha = cagrad_dual_weights(k, c);
  std::vector<double> gw = combine(grads, alpha);
  const double gw_norm = linalg::l2_norm(gw);
  const double phi = c * linalg::l2_norm(mean);
  if (gw_norm > 1e-12) linalg::axpy(phi / gw_norm, gw, mean);
  return mean;
}

WeightSolution imtl_g(const std::vector<std::vector<double>>& grads) {
  const int n = static_cast<int>(grads.size());
  if (n < 1) throw ContractError("imtl_g: need at least one gradient");
  check_same_length(grads, "imtl_g");

  WeightSolution sol;
  sol.status = SolveStatus::converged;
  if (n == 1) {
    sol.alpha = {1.0};
    return sol;
  }

  const std::size_t d = grads.front().size();
  std::vector<std::vector<double>> unit(n);
  for (int i = 0; i < n; ++i) {
    const double nrm = linalg::l2_norm(grads[i]);
    if (nrm < 1e-15) {
      sol.alpha.assign(n, 1.0 / n);
      sol.status = SolveStatus::fallback_used;
      return sol;
    }
    unit[i] = grads[i];
    for (double& v : unit[i]) v /= nrm;
  }

  // alpha_1 = 1 - sum(rest); equations (g . (u_1 - u_r)) = 0 for r = 2..n
  const int m = n - 1;
  std::vector<double> a(static_cast<std::size_t>(m) * m, 0.0);
  std::vector<double> rhs(m, 0.0);
  std::vector<double> du(d);
  for (int r = 0; r < m; ++r) {
    for (std::size_t t = 0; t < d; ++t) du[t] = unit[0][t] - unit[r + 1][t];
    rhs[r] = -linalg::dot(grads[0], du);
    for (int cidx = 0; cidx < m; ++cidx) {
      double v = 0.0;
      for (std::size_t t = 0; t < d; ++t)
        v += (grads[cidx + 1][t] - grads[0][t]) * du[t];
      a[static_cast<std::size_t>(r) * m + cidx] = v;
    }
  }
  std::vector<double> rest;
  if (!linalg::solve_dense(a, rhs, m, rest)) {
    // parallel or otherwise singular geometry: uniform weights, flagged
    sol.alpha.assign(n, 1.0 / n);
    sol.status = SolveStatus::fallback_used;
    return sol;
  }
  sol.alpha.assign(n, 0.0);
  double s = 0.0;
  for (int i = 0; i < m; ++i) {
    sol.alpha[i + 1] = rest[i];
    s += rest[i];
  }
  sol.alpha[0] = 1.0 - s;
  return sol;
}

UncertaintyResult uncertainty_weights(std::span<const double> s,
                                      std::span<const double> losses) {
  if (s.size() != losses.size())
    throw ContractError("uncertainty_weights: size mismatch");
  UncertaintyResult r;
  r.weights.resize(s.size());
  r.s_grad.resize(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!std::isfinite(s[i])) throw NumericError("uncertainty_weights: non-finite s");
    const double w = std::exp(-s[i]);
    r.weights[i] = w;
    r.weighted_loss += w * losses[i] + s[i];
    r.s_grad[i] = -w * losses[i] + 1.0;
  }
  return r;
}

std::vector<double> combine(const std::vector<std::vector<double>>& vectors,
                            std::span<const double> alpha) {
  if (vectors.size() != alpha.size())
    throw ContractError("combine: weight count mismatch");
  std::vector<double> out(vectors.front().size(), 0.0);
  for (std::size_t i = 0; i < vectors.size(); ++i)
    linalg::axpy(alpha[i], vectors[i], out);
  return out;
}

}  // namespace mtopt
