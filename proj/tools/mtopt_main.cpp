// mtopt command line: synthetic data generation, single training runs, the
// experiment grid, offline trace analysis, and the two-task toy problem.
//
// Exit codes: 0 success, 2 configuration error, 3 numeric divergence.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mtopt/errors.hpp"
#include "mtopt/harness.hpp"
#include "mtopt/synthetic.hpp"

using nlohmann::json;

namespace {

struct CommonFlags {
  std::string config;
  std::string out = "out";
  bool out_set = false;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string method;
  int solve_every = 0;
  int threads = 1;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON config file with ExperimentConfig keys");
  cmd->add_option("--out", f.out, "output directory")->each([&](const std::string&) {
    f.out_set = true;
  });
  cmd->add_option("--seed", f.seed, "run seed")->each([&](const std::string&) {
    f.seed_set = true;
  });
  cmd->add_option("--method", f.method,
                  "ls|pub|mgda|pcgrad|cagrad|imtl_g|nashmtl|uncertainty");
  cmd->add_option("--solve-every", f.solve_every, "weight solve interval (pub/nashmtl)");
  cmd->add_option("--threads", f.threads, "worker threads (grid)");
}

mtopt::TrainConfig load_train_config(const CommonFlags& f) {
  mtopt::TrainConfig cfg;
  if (!f.config.empty()) cfg = mtopt::train_config_from_json_file(f.config);
  if (!f.method.empty()) cfg.method = mtopt::method_from_string(f.method);
  if (f.solve_every > 0) cfg.solve_every = f.solve_every;
  return cfg;
}

// --out beats the config's output_dir; the config beats the built-in default
std::string resolve_out(const CommonFlags& f, const mtopt::TrainConfig& cfg) {
  return f.out_set ? f.out : cfg.output_dir;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-task optimization toolkit"};
  app.require_subcommand(1);

  CommonFlags gen_f, train_f, grid_f, analyze_f, toy_f;

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic ranking dataset as CSV");
  add_common(gen, gen_f);
  int gen_n = 50000, gen_dim = 16;
  double gen_rho = -0.3, gen_click = -1.0, gen_conv = -2.5;
  std::string gen_out_file = "ranking.csv";
  gen->add_option("--file", gen_out_file, "output CSV path");
  gen->add_option("--n", gen_n, "sample count");
  gen->add_option("--dim", gen_dim, "feature dimension");
  gen->add_option("--rho", gen_rho, "correlation of the two task weight vectors");
  gen->add_option("--click-bias", gen_click, "CTR logit bias");
  gen->add_option("--conv-bias", gen_conv, "conversion logit bias");

  auto* train = app.add_subcommand("train", "run one training cell");
  add_common(train, train_f);

  auto* grid = app.add_subcommand("grid", "run the experiment grid and write the report");
  add_common(grid, grid_f);

  auto* analyze = app.add_subcommand("analyze",
                                     "regenerate report.json/report.csv from traces");
  add_common(analyze, analyze_f);

  auto* toy = app.add_subcommand("toy", "run the two-task toy trajectories");
  add_common(toy, toy_f);
  double toy_kappa = 1.0;
  int toy_steps = 2000;
  std::string toy_optimizer;
  toy->add_option("--kappa", toy_kappa, "scale of the second toy loss");
  toy->add_option("--steps", toy_steps, "steps per trajectory");
  toy->add_option("--optimizer", toy_optimizer, "adam|adagrad|rmsprop|sgd");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) {
      mtopt::RankingDatasetConfig cfg;
      if (!gen_f.config.empty())
        cfg = mtopt::train_config_from_json_file(gen_f.config).data;
      cfg.n_samples = gen_n;
      cfg.dim = gen_dim;
      cfg.rho = gen_rho;
      cfg.click_bias = gen_click;
      cfg.conv_bias = gen_conv;
      if (gen_f.seed_set) cfg.seed = gen_f.seed;
      const mtopt::RankingDataset ds = mtopt::gen_ranking(cfg);
      mtopt::write_ranking_csv(ds, gen_out_file);
      json report = {{"file", gen_out_file},
                     {"n", ds.n},
                     {"dim", ds.dim},
                     {"rate_ctr", ds.rate_ctr},
                     {"rate_ctcvr", ds.rate_ctcvr},
                     {"base_bce_ctr", ds.base_bce_ctr},
                     {"base_bce_ctcvr", ds.base_bce_ctcvr}};
      std::printf("%s\n", report.dump(2).c_str());
      return 0;
    }
    if (*train) {
      const mtopt::TrainConfig cfg = load_train_config(train_f);
      const std::uint64_t seed =
          train_f.seed_set ? train_f.seed : (cfg.seeds.empty() ? 1 : cfg.seeds.front());
      const std::string out = resolve_out(train_f, cfg);
      const mtopt::RunResult rr = mtopt::run_training(cfg, seed, out);
      std::printf("status=%s best_epoch=%d best_avg_auc=%.6f out=%s\n",
                  rr.status.c_str(), rr.best_epoch, rr.summary.avg_auc, out.c_str());
      return 0;
    }
    if (*grid) {
      mtopt::GridSpec spec;
      if (!grid_f.config.empty()) spec = mtopt::grid_spec_from_json_file(grid_f.config);
      if (!grid_f.method.empty())
        spec.methods = {mtopt::method_from_string(grid_f.method)};
      if (grid_f.solve_every > 0) spec.base.solve_every = grid_f.solve_every;
      const mtopt::GridOutcome oc = mtopt::run_grid(spec, grid_f.out, grid_f.threads);
      std::printf("cells=%d failed=%d report=%s\n", oc.cells_total, oc.cells_failed,
                  oc.report_json_path.c_str());
      return 0;
    }
    if (*analyze) {
      const mtopt::GridOutcome oc = mtopt::analyze_grid(analyze_f.out);
      std::printf("cells=%d failed=%d report=%s\n", oc.cells_total, oc.cells_failed,
                  oc.report_json_path.c_str());
      return 0;
    }
    if (*toy) {
      mtopt::ToyRunConfig cfg;
      if (!toy_f.config.empty()) {
        const mtopt::TrainConfig tc = mtopt::train_config_from_json_file(toy_f.config);
        cfg.optim = tc.optim;
        cfg.method = tc.method;
        cfg.umm = tc.umm;
        cfg.solver = tc.solver;
        cfg.solve_every = tc.solve_every;
        cfg.cagrad_c = tc.cagrad_c;
      }
      if (!toy_f.method.empty()) cfg.method = mtopt::method_from_string(toy_f.method);
      if (toy_f.solve_every > 0) cfg.solve_every = toy_f.solve_every;
      if (toy_f.seed_set) cfg.seed = toy_f.seed;
      if (!toy_optimizer.empty())
        cfg.optim.kind = mtopt::opt_kind_from_string(toy_optimizer);
      cfg.toy.kappa = toy_kappa;
      cfg.toy.steps = toy_steps;
      const auto trajectories = mtopt::run_toy(cfg, toy_f.out);
      for (std::size_t k = 0; k < trajectories.size(); ++k)
        std::printf("init %zu: final=(%.4f, %.4f) distance_to_front=%.6f\n", k,
                    trajectories[k].final_theta[0], trajectories[k].final_theta[1],
                    trajectories[k].final_distance_to_front);
      return 0;
    }
  } catch (const mtopt::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const mtopt::DivergenceError& e) {
    std::fprintf(stderr, "divergence: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
