// Acceptance suite: runs every acceptance check and prints one PASS/FAIL
// line per criterion. Exit code is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mtopt/analysis.hpp"
#include "mtopt/harness.hpp"
#include "mtopt/linalg.hpp"
#include "mtopt/models.hpp"
#include "mtopt/optimizer.hpp"
#include "mtopt/rng.hpp"
#include "mtopt/solvers.hpp"
#include "mtopt/synthetic.hpp"
#include "mtopt/tensor.hpp"
#include "mtopt/trace.hpp"
#include "oracles.hpp"

using namespace mtopt;
namespace fs = std::filesystem;

namespace {

int g_failed = 0;

void report(int idx, bool ok, const std::string& name, const std::string& detail) {
  std::printf("%s criterion %2d: %s (%s)\n", ok ? "PASS" : "FAIL", idx, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failed;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<double>> random_columns(Rng& rng, int d, int n) {
  std::vector<std::vector<double>> cols(n, std::vector<double>(d));
  for (auto& c : cols)
    for (double& v : c) v = rng.normal();
  return cols;
}

// --------------------------------------------------------------------------

void criterion_1_bargaining_exactness() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string detail;

  // diagonal: alpha_i = 1/sqrt(G_ii) within 1e-6
  {
    Rng rng(101);
    SolverConfig cfg;
    cfg.tol = 1e-8;
    for (int trial = 0; trial < 20 && ok; ++trial) {
      const int n = 1 + static_cast<int>(rng.below(8));
      GramMatrix g;
      g.n = n;
      g.g.assign(static_cast<std::size_t>(n) * n, 0.0);
      for (int i = 0; i < n; ++i)
        g.g[static_cast<std::size_t>(i) * n + i] = rng.uniform(0.3, 30.0);
      const WeightSolution sol = solve_bargaining(g, cfg);
      for (int i = 0; i < n; ++i) {
        const double expect = 1.0 / std::sqrt(g.at(i, i));
        if (std::abs(sol.alpha[i] - expect) > 1e-6) {
          ok = false;
          detail = "diagonal case off by " +
                   std::to_string(std::abs(sol.alpha[i] - expect));
        }
      }
    }
  }

  // 100 random well-conditioned PSD, n in {2..8}: residual <= 1e-3 within
  // 200 iterations and alpha within 1e-3 relative of the Newton oracle
  double worst_res = 0.0, worst_rel = 0.0;
  int worst_iters = 0;
  {
    Rng rng(202);
    SolverConfig cfg;  // defaults: tol 1e-3, ccp_max_iter 200
    for (int trial = 0; trial < 100; ++trial) {
      const int n = 2 + static_cast<int>(rng.below(7));
      GramMatrix g;
      g.n = n;
      g.g = oracle::random_feasible_psd(n, rng);
      const WeightSolution sol = solve_bargaining(g, cfg);
      worst_res = std::max(worst_res, sol.residual);
      worst_iters = std::max(worst_iters, sol.iterations);
      if (sol.status != SolveStatus::converged) ok = false;

      std::vector<double> ridged = g.g;
      const double lam = cfg.ridge_rel * g.trace() / n;
      for (int i = 0; i < n; ++i) ridged[static_cast<std::size_t>(i) * n + i] += lam;
      const std::vector<double> ref = oracle::newton_bargaining(ridged, n);
      for (int i = 0; i < n; ++i)
        worst_rel = std::max(worst_rel,
                             std::abs(sol.alpha[i] - ref[i]) / std::abs(ref[i]));
    }
    if (worst_res > 1e-3 || worst_rel > 1e-3 || worst_iters > 200) ok = false;
  }
  const double el = seconds_since(t0);
  if (el >= 10.0) ok = false;
  if (detail.empty()) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "worst residual %.2e, worst Newton rel %.2e, worst iters %d, %.2fs",
                  worst_res, worst_rel, worst_iters, el);
    detail = buf;
  }
  report(1, ok, "bargaining solver exactness", detail);
}

void criterion_2_positive_utilities() {
  bool ok = true;
  Rng rng(303);
  double min_utility = 1e300;
  int converged = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(4));
    const auto cols = random_columns(rng, 1000, n);
    const GramMatrix g = GramMatrix::from_columns(cols, GramSource::updates);
    const WeightSolution sol = solve_bargaining(g);
    if (sol.status != SolveStatus::converged) continue;
    ++converged;
    const std::vector<double> joint = combine(cols, sol.alpha);
    for (int i = 0; i < n; ++i) {
      const double u = linalg::dot(cols[i], joint);  // utility (col_i . D alpha)
      min_utility = std::min(min_utility, u);
      if (u <= 0.0) ok = false;
      if (std::abs(u * sol.alpha[i] - 1.0) > 2e-3) ok = false;
    }
  }
  if (converged < 100) ok = false;
  char buf[120];
  std::snprintf(buf, sizeof(buf), "min utility %.4f over %d converged solves",
                min_utility, converged);
  report(2, ok, "positive utilities at converged solutions", buf);
}

void criterion_3_column_rescale_invariance() {
  bool ok = true;
  Rng rng(404);
  SolverConfig cfg;
  cfg.tol = 1e-9;
  double worst = 0.0;
  auto start_feasible = [](const GramMatrix& g) {
    for (int i = 0; i < g.n; ++i) {
      double rs = 0.0;
      for (int j = 0; j < g.n; ++j) rs += g.at(i, j);
      if (rs <= 0.0) return false;
    }
    return true;
  };
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(3));
    // the invariance claim is about converged solves; instances whose
    // all-ones start is infeasible take the documented fallback path and
    // are exercised elsewhere, so sample until both solves are feasible
    std::vector<std::vector<double>> cols, scaled;
    std::vector<double> scale(n);
    GramMatrix g1, g2;
    do {
      cols = random_columns(rng, 1000, n);
      for (double& s : scale) s = rng.uniform(0.1, 10.0);
      scaled = cols;
      for (int i = 0; i < n; ++i)
        for (double& v : scaled[static_cast<std::size_t>(i)]) v *= scale[i];
      g1 = GramMatrix::from_columns(cols, GramSource::updates);
      g2 = GramMatrix::from_columns(scaled, GramSource::updates);
    } while (!start_feasible(g1) || !start_feasible(g2));

    const WeightSolution s1 = solve_bargaining(g1, cfg);
    const WeightSolution s2 = solve_bargaining(g2, cfg);
    if (s1.status != SolveStatus::converged || s2.status != SolveStatus::converged) {
      ok = false;
      continue;
    }
    const std::vector<double> j1 = combine(cols, s1.alpha);
    const std::vector<double> j2 = combine(scaled, s2.alpha);
    const double ref = linalg::l2_norm(j1);
    for (int k = 0; k < 1000; ++k)
      worst = std::max(worst, std::abs(j1[k] - j2[k]) / ref);
  }
  if (worst > 1e-6) ok = false;
  char buf[100];
  std::snprintf(buf, sizeof(buf), "worst relative joint-update deviation %.2e", worst);
  report(3, ok, "column-rescale invariance of the joint update", buf);
}

void criterion_4_single_task_reduction() {
  Rng rng(505);
  const int d = 500;
  std::vector<double> g(d);
  for (double& v : g) v = rng.normal();

  OptimizerConfig oc;  // adam defaults
  PubStepConfig pc;
  pc.solve_every = 1;
  pc.solver.tol = 1e-10;
  PubEngine engine(oc, pc, d, {0});
  ParamSet p;
  p.shared.push_back({"theta", Tensor::zeros({d})});
  p.per_task.resize(1);
  const PubStepResult r = engine.step(p, {g}, {{}});

  OptimizerState plain(oc, d);
  const std::vector<double> col = plain.update_column(g);
  double num = 0.0, na = 0.0, nb = 0.0;
  for (int k = 0; k < d; ++k) {
    num += r.joint_update[k] * col[k];
    na += r.joint_update[k] * r.joint_update[k];
    nb += col[k] * col[k];
  }
  const double cos = num / std::sqrt(na * nb);
  const double norm = linalg::l2_norm(r.joint_update);
  const bool ok = std::abs(cos - 1.0) <= 1e-10 && std::abs(norm - 1.0) <= 1e-6;
  char buf[100];
  std::snprintf(buf, sizeof(buf), "cosine-1 = %.2e, |Dalpha|-1 = %.2e", cos - 1.0,
                norm - 1.0);
  report(4, ok, "n=1 reduction to the unit-norm per-task update", buf);
}

void criterion_5_autodiff() {
  Rng rng(606);
  bool ok = true;
  double worst = 0.0;
  int resampled = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int in = 2 + static_cast<int>(rng.below(8));
    const int layers = 1 + static_cast<int>(rng.below(3));
    const int batch = 1 + static_cast<int>(rng.below(4));
    std::vector<int> widths = {in};
    for (int l = 0; l < layers; ++l) widths.push_back(1 + static_cast<int>(rng.below(64)));

    std::vector<Tensor> ws, bs;
    Tensor head, x, y;
    // central differences are only a valid oracle away from relu kinks, so
    // reject draws with a pre-activation within 1e-4 of zero
    bool kink_free = false;
    while (!kink_free) {
      ws.clear();
      bs.clear();
      for (int l = 0; l < layers; ++l) {
        const double scale = std::sqrt(2.0 / (widths[l] + widths[l + 1]));
        Tensor w = Tensor::zeros({widths[l], widths[l + 1]});
        for (double& v : w.data) v = rng.normal() * scale;
        Tensor b = Tensor::zeros({widths[l + 1]});
        for (double& v : b.data) v = rng.normal() * 0.1;
        ws.push_back(std::move(w));
        bs.push_back(std::move(b));
      }
      head = Tensor::zeros({widths.back(), 1});
      for (double& v : head.data) v = rng.normal() * std::sqrt(2.0 / (widths.back() + 1));
      x = Tensor::zeros({batch, in});
      for (double& v : x.data) v = rng.normal();
      y = Tensor::zeros({batch, 1});
      for (double& v : y.data) v = rng.bernoulli(0.5) ? 1.0 : 0.0;

      kink_free = true;
      Tensor h = x;
      for (int l = 0; l < layers && kink_free; ++l) {
        const Tensor pre = add(matmul(h, ws[l]), bs[l]);
        for (double v : pre.data)
          if (std::abs(v) < 1e-3) kink_free = false;
        h = relu(pre);
      }
      if (!kink_free) ++resampled;
    }

    auto loss_value = [&]() {
      Tensor h = x;
      for (int l = 0; l < layers; ++l) h = relu(add(matmul(h, ws[l]), bs[l]));
      return bce_with_logits(matmul(h, head), y).value();
    };

    std::vector<Tensor*> params;
    for (auto& w : ws) params.push_back(&w);
    for (auto& b : bs) params.push_back(&b);
    params.push_back(&head);

    Tape tape;
    for (Tensor* t : params) tape.watch(*t);
    Tensor h = x;
    for (int l = 0; l < layers; ++l) h = relu(add(matmul(h, ws[l]), bs[l]));
    tape.backward(bce_with_logits(matmul(h, head), y));

    const auto fd = finite_diff_grad(loss_value, params, 1e-5);
    for (Tensor* t : params) {
      const auto& numeric = fd.at(t);
      for (std::size_t i = 0; i < numeric.size(); ++i) {
        if (std::abs(t->grad[i]) <= 1e-6) continue;
        const double rel = std::abs(t->grad[i] - numeric[i]) / std::abs(t->grad[i]);
        worst = std::max(worst, rel);
        if (rel >= 1e-4) ok = false;
      }
    }
  }
  char buf[100];
  std::snprintf(buf, sizeof(buf), "worst relative error %.2e over 50 nets (%d redraws)",
                worst, resampled);
  report(5, ok, "backward matches central finite differences", buf);
}

void criterion_6_baseline_oracles() {
  bool ok = true;
  std::string why;
  Rng rng(707);

  // MGDA two-task closed form vs Frank-Wolfe
  double worst_fw = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    auto v = random_columns(rng, 8, 2);
    const WeightSolution closed = solve_min_norm(v);
    const auto fw = min_norm_frank_wolfe(
        GramMatrix::from_columns(v, GramSource::gradients), 2000, 1e-14);
    const auto c1 = combine(v, closed.alpha);
    const auto c2 = combine(v, fw);
    for (std::size_t k = 0; k < c1.size(); ++k)
      worst_fw = std::max(worst_fw, std::abs(c1[k] - c2[k]));
  }
  if (worst_fw > 1e-4) {
    ok = false;
    why += "mgda closed-vs-fw " + std::to_string(worst_fw) + "; ";
  }

  // MGDA n=3 vs simplex grid search at step 1e-3
  double worst_grid = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    auto v = random_columns(rng, 5, 3);
    const WeightSolution sol = solve_min_norm(v);
    const auto grid = oracle::min_norm_grid(v, 1e-3);
    const double ns = linalg::l2_norm(combine(v, sol.alpha));
    const double ng = linalg::l2_norm(combine(v, grid));
    worst_grid = std::max(worst_grid, ns - ng);
  }
  if (worst_grid > 1e-3) {
    ok = false;
    why += "mgda n=3 vs grid " + std::to_string(worst_grid) + "; ";
  }

  // PCGrad worked examples, exact
  {
    Rng prng(1);
    const auto a = pcgrad({{1, 0}, {0, 1}}, prng);
    const auto b = pcgrad({{1, 0}, {-1, 1}}, prng);
    const auto c = pcgrad({{2, 1}, {-2, -1}}, prng);
    if (a[0] != std::vector<double>{1, 0} || a[1] != std::vector<double>{0, 1})
      ok = false;
    if (std::abs(b[0][0] - 0.5) > 1e-15 || std::abs(b[0][1] - 0.5) > 1e-15) ok = false;
    if (std::abs(c[0][0]) > 1e-15 || std::abs(c[0][1]) > 1e-15) ok = false;
    if (!ok && why.empty()) why = "pcgrad examples; ";
  }

  // CAGrad: c = 0 mean exact; c = 0.5 two-task vs grid oracle
  {
    auto v = random_columns(rng, 6, 2);
    const auto mean = cagrad(v, 0.0);
    for (int k = 0; k < 6; ++k)
      if (mean[k] != 0.5 * (v[0][k] + v[1][k])) ok = false;

    double worst_cg = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      auto g = random_columns(rng, 4, 2);
      const auto combined = cagrad(g, 0.5);
      const auto w = oracle::cagrad_dual_grid(g, 0.5, 1e-4);
      std::vector<double> g0(4), gw(4);
      for (int k = 0; k < 4; ++k) {
        g0[k] = 0.5 * (g[0][k] + g[1][k]);
        gw[k] = w[0] * g[0][k] + w[1] * g[1][k];
      }
      const double phi = 0.5 * linalg::l2_norm(g0);
      const double nw = linalg::l2_norm(gw);
      for (int k = 0; k < 4; ++k) {
        const double expect = g0[k] + (nw > 1e-12 ? phi / nw * gw[k] : 0.0);
        worst_cg = std::max(worst_cg, std::abs(combined[k] - expect));
      }
    }
    if (worst_cg > 1e-3) {
      ok = false;
      why += "cagrad vs grid " + std::to_string(worst_cg) + "; ";
    }
  }

  // IMTL-G equal projections
  double worst_proj = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(3));
    auto g = random_columns(rng, 7, n);
    const WeightSolution sol = imtl_g(g);
    if (sol.status != SolveStatus::converged) continue;
    const auto agg = combine(g, sol.alpha);
    std::vector<double> proj(n);
    for (int i = 0; i < n; ++i)
      proj[i] = linalg::dot(agg, g[i]) / linalg::l2_norm(g[i]);
    for (int i = 1; i < n; ++i)
      worst_proj = std::max(worst_proj, std::abs(proj[i] - proj[0]));
  }
  if (worst_proj > 1e-8) {
    ok = false;
    why += "imtl projections " + std::to_string(worst_proj) + "; ";
  }

  if (why.empty()) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "fw %.1e, n3-grid %.1e, imtl %.1e, pcgrad/cagrad exact", worst_fw,
                  worst_grid, worst_proj);
    why = buf;
  }
  report(6, ok, "baseline solver oracles", why);
}

void criterion_7_paper_values() {
  bool ok = true;
  const double d1 = diff_metric(0.130, 0.116);
  const double d2 = diff_metric(0.138, 0.106);
  const double d3 = diff_metric(0.144, 0.1228);
  if (std::abs(d1 - 0.1138) > 5e-4) ok = false;
  if (std::abs(d2 - 0.2623) > 5e-4) ok = false;
  if (std::abs(d3 - 0.1589) > 5e-4) ok = false;

  const double dm = delta_m(std::vector<double>{39.29, 65.33},
                            std::vector<double>{38.31, 63.76},
                            std::vector<int>{0, 0}, std::vector<int>{0, 0});
  if (std::abs(dm - (-2.51)) > 0.02) ok = false;
  char buf[140];
  std::snprintf(buf, sizeof(buf), "Diff = %.4f / %.4f / %.4f, delta_m = %.3f%%", d1, d2,
                d3, dm);
  report(7, ok, "published function values", buf);
}

void criterion_8_statistics_oracles() {
  bool ok = true;
  std::string why;
  const Chi2Result chi = chi_square_2x2({{{20, 10}, {10, 20}}});
  if (std::abs(chi.chi2 - 6.667) > 1e-3 || chi.bucket != PBucket::p01) {
    ok = false;
    why += "chi2; ";
  }
  const TTestResult tt = t_test_independent(std::vector<double>{1, 2, 3},
                                            std::vector<double>{2, 3, 4});
  if (std::abs(tt.t - (-1.2247)) > 1e-3) {
    ok = false;
    why += "welch t; ";
  }
  Rng rng(808);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 2 + static_cast<int>(rng.below(60));
    std::vector<double> scores(k), labels(k);
    bool pos = false, neg = false;
    for (int i = 0; i < k; ++i) {
      scores[i] = std::floor(rng.uniform01() * 10) / 10.0;
      labels[i] = rng.bernoulli(0.4) ? 1.0 : 0.0;
      pos |= labels[i] == 1.0;
      neg |= labels[i] == 0.0;
    }
    if (!pos) labels[0] = 1.0;
    if (!neg) labels[k > 1 ? 1 : 0] = 0.0;
    worst = std::max(worst, std::abs(auc(scores, labels) -
                                     oracle::auc_pair_count(scores, labels)));
  }
  if (worst > 1e-12) {
    ok = false;
    why += "auc fast-vs-oracle " + std::to_string(worst) + "; ";
  }
  if (why.empty()) {
    char buf[120];
    std::snprintf(buf, sizeof(buf), "chi2 %.4f, t %.5f, auc max dev %.1e", chi.chi2,
                  tt.t, worst);
    why = buf;
  }
  report(8, ok, "statistics oracles", why);
}

void criterion_9_toy() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string why;

  ToyRunConfig pub_cfg;
  pub_cfg.method = Method::pub;
  pub_cfg.optim.kind = OptKind::adam;
  pub_cfg.optim.lr = 1e-3;
  pub_cfg.solve_every = 1;
  pub_cfg.toy.steps = 2000;
  const auto pub_runs = run_toy(pub_cfg, "");
  double worst_front = 0.0, min_endpoint = 1e300;
  for (const auto& tr : pub_runs) {
    worst_front = std::max(worst_front, tr.final_distance_to_front);
    for (const auto& endpoint : {pub_cfg.toy.c1, pub_cfg.toy.c2}) {
      const double dx = tr.final_theta[0] - endpoint[0];
      const double dy = tr.final_theta[1] - endpoint[1];
      min_endpoint = std::min(min_endpoint, std::sqrt(dx * dx + dy * dy));
    }
  }
  if (worst_front >= 1e-2) {
    ok = false;
    why += "pub off front " + std::to_string(worst_front) + "; ";
  }
  if (min_endpoint < 0.1) {
    ok = false;
    why += "pub endpoint too close to a segment endpoint; ";
  }

  ToyRunConfig ls_cfg;
  ls_cfg.method = Method::ls;
  ls_cfg.optim.kind = OptKind::sgd;
  ls_cfg.optim.lr = 1e-3;
  ls_cfg.toy.kappa = 1000.0;
  ls_cfg.toy.steps = 2000;
  const auto ls_runs = run_toy(ls_cfg, "");
  double worst_c2 = 0.0;
  for (const auto& tr : ls_runs) {
    const double dx = tr.final_theta[0] - ls_cfg.toy.c2[0];
    const double dy = tr.final_theta[1] - ls_cfg.toy.c2[1];
    worst_c2 = std::max(worst_c2, std::sqrt(dx * dx + dy * dy));
  }
  if (worst_c2 >= 0.05) {
    ok = false;
    why += "ls seesaw endpoint " + std::to_string(worst_c2) + "; ";
  }

  const double el = seconds_since(t0);
  if (el >= 30.0) {
    ok = false;
    why += "too slow; ";
  }
  if (why.empty()) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "pub max front dist %.4f, min endpoint dist %.2f, ls->c2 %.4f, %.1fs",
                  worst_front, min_endpoint, worst_c2, el);
    why = buf;
  }
  report(9, ok, "toy trajectories", why);
}

TrainConfig seesaw_config() {
  TrainConfig cfg;  // default conflicting dataset: rho -0.3, 50k x 16
  cfg.model.kind = ModelKind::mmoe;
  // the desk-scale default width saturates both tasks; a capacity-
  // constrained mixture makes the tasks actually compete
  cfg.model.hidden_dim = 2;
  cfg.model.expert_count = 2;
  cfg.optim.lr = 5e-3;
  cfg.epochs = 60;
  cfg.batch_size = 512;
  cfg.solve_every = 10;
  return cfg;
}

void criterion_10_seesaw() {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = fs::temp_directory_path() / "mtopt_acceptance" / "seesaw";
  fs::remove_all(dir);

  TrainConfig cfg = seesaw_config();
  double ls_avg = 0.0, ls_worse = 0.0, pub_avg = 0.0, pub_worse = 0.0;
  for (const Method m : {Method::ls, Method::pub}) {
    cfg.method = m;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const RunResult rr = run_training(
          cfg, seed, (dir / (to_string(m) + std::to_string(seed))).string());
      const EpochAuc& best = rr.val_auc[static_cast<std::size_t>(rr.best_epoch)];
      const double worse = std::min(best.per_task[0], best.per_task[1]);
      if (m == Method::ls) {
        ls_avg += best.average / 5.0;
        ls_worse += worse / 5.0;
      } else {
        pub_avg += best.average / 5.0;
        pub_worse += worse / 5.0;
      }
    }
  }
  const double el = seconds_since(t0);
  const bool ok = pub_avg >= ls_avg - 0.001 && pub_worse >= ls_worse && el < 900.0;
  char buf[180];
  std::snprintf(buf, sizeof(buf),
                "avg auc pub %.5f vs ls %.5f; worse-task pub %.5f vs ls %.5f; %.0fs",
                pub_avg, ls_avg, pub_worse, ls_worse, el);
  report(10, ok, "synthetic seesaw mitigation", buf);
  fs::remove_all(dir);
}

void criterion_11_grid() {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = fs::temp_directory_path() / "mtopt_acceptance" / "grid";
  fs::remove_all(dir);

  GridSpec spec;  // default: 4 methods x 3 models x 4 datasets x 3 seeds
  const GridOutcome oc = run_grid(spec, dir.string(), 8);
  bool ok = oc.cells_total == 144 && oc.cells_failed == 0;
  std::string why;
  if (!ok) why = "cells_total/failed mismatch; ";

  const std::string report_json = slurp(oc.report_json_path);
  const std::string report_csv = slurp(oc.report_csv_path);
  if (report_json.find("\"confusion\"") == std::string::npos ||
      report_json.find("\"similarity_table\"") == std::string::npos ||
      report_csv.find("# confusion_matrix") == std::string::npos) {
    ok = false;
    why += "report missing sections; ";
  }

  fs::remove(oc.report_json_path);
  fs::remove(oc.report_csv_path);
  const GridOutcome oc2 = analyze_grid(dir.string());
  if (slurp(oc2.report_json_path) != report_json ||
      slurp(oc2.report_csv_path) != report_csv) {
    ok = false;
    why += "offline reanalysis differs; ";
  }

  const double el = seconds_since(t0);
  if (el >= 2700.0) {
    ok = false;
    why += "too slow; ";
  }
  if (why.empty()) {
    char buf[120];
    std::snprintf(buf, sizeof(buf),
                  "144 cells, 0 failed, byte-identical reanalysis, %.0fs", el);
    why = buf;
  }
  report(11, ok, "grid and statistical pipeline end to end", why);
  fs::remove_all(dir);
}

void criterion_12_solve_frequency() {
  const fs::path dir = fs::temp_directory_path() / "mtopt_acceptance" / "freq";
  fs::remove_all(dir);
  bool ok = true;
  std::string why;

  // alpha changes only at solve steps for s in {10, 100}
  TrainConfig cfg;  // default dataset and model
  cfg.method = Method::pub;
  cfg.epochs = 2;
  for (const int s : {10, 100}) {
    cfg.solve_every = s;
    const std::string out = (dir / ("s" + std::to_string(s))).string();
    run_training(cfg, 1, out);
    const TraceFile tf = read_trace(out + "/trace.jsonl");
    for (std::size_t k = 1; k < tf.records.size(); ++k) {
      if (static_cast<int>(k) % s != 0 &&
          tf.records[k].alpha != tf.records[k - 1].alpha) {
        ok = false;
        why += "alpha changed off-schedule at s=" + std::to_string(s) + "; ";
        break;
      }
    }
  }

  // per-epoch wall time: pub with s=10 under 1.5x ls
  auto epoch_time = [&](Method m, const std::string& tag) {
    TrainConfig tc;
    tc.method = m;
    tc.solve_every = 10;
    tc.epochs = 3;
    double best = 1e300;
    for (int rep = 0; rep < 3; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      run_training(tc, 1, (dir / (tag + std::to_string(rep))).string());
      best = std::min(best, seconds_since(t0) / tc.epochs);
    }
    return best;
  };
  const double t_ls = epoch_time(Method::ls, "ls");
  const double t_pub = epoch_time(Method::pub, "pub");
  if (t_pub >= 1.5 * t_ls) {
    ok = false;
    why += "wall ratio " + std::to_string(t_pub / t_ls) + "; ";
  }
  if (why.empty()) {
    char buf[120];
    std::snprintf(buf, sizeof(buf),
                  "alpha cadence exact; per-epoch pub %.3fs vs ls %.3fs (ratio %.2f)",
                  t_pub, t_ls, t_pub / t_ls);
    why = buf;
  }
  report(12, ok, "solve-frequency contract and overhead", why);
  fs::remove_all(dir);
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  criterion_1_bargaining_exactness();
  criterion_2_positive_utilities();
  criterion_3_column_rescale_invariance();
  criterion_4_single_task_reduction();
  criterion_5_autodiff();
  criterion_6_baseline_oracles();
  criterion_7_paper_values();
  criterion_8_statistics_oracles();
  criterion_9_toy();
  criterion_10_seesaw();
  criterion_11_grid();
  criterion_12_solve_frequency();
  std::printf("%d of 12 criteria passed in %.0fs\n", 12 - g_failed, seconds_since(t0));
  return g_failed;
}
