#include "mtopt/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <thread>

#include <nlohmann/json.hpp>

#include "mtopt/errors.hpp"
#include "mtopt/linalg.hpp"
#include "mtopt/rng.hpp"
#include "mtopt/trace.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mtopt {

std::string to_string(Method m) {
  switch (m) {
    case Method::ls: return "ls";
    case Method::pub: return "pub";
    case Method::mgda: return "mgda";
    case Method::pcgrad: return "pcgrad";
    case Method::cagrad: return "cagrad";
    case Method::imtl_g: return "imtl_g";
    case Method::nashmtl: return "nashmtl";
    case Method::uncertainty: return "uncertainty";
  }
  return "unknown";
}

Method method_from_string(const std::string& s) {
  if (s == "ls") return Method::ls;
  if (s == "pub") return Method::pub;
  if (s == "mgda") return Method::mgda;
  if (s == "pcgrad") return Method::pcgrad;
  if (s == "cagrad") return Method::cagrad;
  if (s == "imtl_g") return Method::imtl_g;
  if (s == "nashmtl") return Method::nashmtl;
  if (s == "uncertainty") return Method::uncertainty;
  throw ConfigError("unknown method: " + s);
}

// ---------------------------------------------------------------------------
// config <-> json

namespace {

void parse_data(const json& j, RankingDatasetConfig& d) {
  d.n_samples = j.value("n_samples", d.n_samples);
  d.dim = j.value("dim", d.dim);
  d.rho = j.value("rho", d.rho);
  d.click_bias = j.value("click_bias", d.click_bias);
  d.conv_bias = j.value("conv_bias", d.conv_bias);
  d.seed = j.value("seed", d.seed);
}

void parse_model(const json& j, ModelSpec& m) {
  if (j.contains("kind")) m.kind = model_kind_from_string(j.at("kind").get<std::string>());
  m.input_dim = j.value("input_dim", m.input_dim);
  m.expert_count = j.value("expert_count", m.expert_count);
  m.experts_per_task = j.value("experts_per_task", m.experts_per_task);
  m.hidden_dim = j.value("hidden_dim", m.hidden_dim);
  m.task_count = j.value("task_count", m.task_count);
}

void parse_optim(const json& j, OptimizerConfig& o) {
  if (j.contains("kind")) o.kind = opt_kind_from_string(j.at("kind").get<std::string>());
  o.lr = j.value("lr", o.lr);
  o.beta1 = j.value("beta1", o.beta1);
  o.beta2 = j.value("beta2", o.beta2);
  o.beta = j.value("beta", o.beta);
  o.eps = j.value("eps", o.eps);
  o.bias_correct = j.value("bias_correct", o.bias_correct);
  o.moment_update_before = j.value("moment_update_before", o.moment_update_before);
}

void parse_umm(const json& j, UmmConfig& u) {
  if (j.contains("kind")) u.kind = umm_kind_from_string(j.at("kind").get<std::string>());
  u.sigma_rel = j.value("sigma_rel", u.sigma_rel);
  u.sigma_abs = j.value("sigma_abs", u.sigma_abs);
  u.max_norm = j.value("max_norm", u.max_norm);
  u.beta = j.value("beta", u.beta);
  u.eps = j.value("eps", u.eps);
}

void parse_solver(const json& j, SolverConfig& s) {
  s.ccp_max_iter = j.value("ccp_max_iter", s.ccp_max_iter);
  s.inner_max_iter = j.value("inner_max_iter", s.inner_max_iter);
  s.tol = j.value("tol", s.tol);
  s.ridge_rel = j.value("ridge_rel", s.ridge_rel);
  if (j.contains("fallback")) {
    const auto f = j.at("fallback").get<std::string>();
    if (f == "ls") s.fallback = FallbackKind::ls;
    else if (f == "min_norm") s.fallback = FallbackKind::min_norm;
    else throw ConfigError("unknown solver fallback: " + f);
  }
  s.normalize_sum_n = j.value("normalize_sum_n", s.normalize_sum_n);
}

TrainConfig parse_train_config(const json& j) {
  TrainConfig cfg;
  if (j.contains("data")) parse_data(j.at("data"), cfg.data);
  if (j.contains("model")) parse_model(j.at("model"), cfg.model);
  if (j.contains("optim")) parse_optim(j.at("optim"), cfg.optim);
  if (j.contains("method")) cfg.method = method_from_string(j.at("method").get<std::string>());
  if (j.contains("umm")) parse_umm(j.at("umm"), cfg.umm);
  if (j.contains("solver")) parse_solver(j.at("solver"), cfg.solver);
  cfg.solve_every = j.value("solve_every", cfg.solve_every);
  cfg.cagrad_c = j.value("cagrad_c", cfg.cagrad_c);
  cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  cfg.output_dir = j.value("output_dir", cfg.output_dir);
  return cfg;
}

json train_config_json(const TrainConfig& c) {
  json j;
  j["data"] = {{"n_samples", c.data.n_samples}, {"dim", c.data.dim},
               {"rho", c.data.rho},             {"click_bias", c.data.click_bias},
               {"conv_bias", c.data.conv_bias}, {"seed", c.data.seed}};
  j["model"] = {{"kind", to_string(c.model.kind)},
                {"input_dim", c.model.input_dim},
                {"expert_count", c.model.expert_count},
                {"experts_per_task", c.model.experts_per_task},
                {"hidden_dim", c.model.hidden_dim},
                {"task_count", c.model.task_count}};
  j["optim"] = {{"kind", to_string(c.optim.kind)}, {"lr", c.optim.lr},
                {"beta1", c.optim.beta1},          {"beta2", c.optim.beta2},
                {"beta", c.optim.beta},            {"eps", c.optim.eps},
                {"bias_correct", c.optim.bias_correct},
                {"moment_update_before", c.optim.moment_update_before}};
  j["method"] = to_string(c.method);
  j["umm"] = {{"kind", to_string(c.umm.kind)},   {"sigma_rel", c.umm.sigma_rel},
              {"sigma_abs", c.umm.sigma_abs},    {"max_norm", c.umm.max_norm},
              {"beta", c.umm.beta},              {"eps", c.umm.eps}};
  j["solver"] = {{"ccp_max_iter", c.solver.ccp_max_iter},
                 {"inner_max_iter", c.solver.inner_max_iter},
                 {"tol", c.solver.tol},
                 {"ridge_rel", c.solver.ridge_rel},
                 {"fallback", c.solver.fallback == FallbackKind::ls ? "ls" : "min_norm"},
                 {"normalize_sum_n", c.solver.normalize_sum_n}};
  j["solve_every"] = c.solve_every;
  j["cagrad_c"] = c.cagrad_c;
  j["weight_decay"] = c.weight_decay;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir;
  return j;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw ConfigError("invalid JSON in " + path + ": " + e.what());
  }
}

}  // namespace

TrainConfig train_config_from_json_file(const std::string& path) {
  try {
    return parse_train_config(load_json_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
}

TrainConfig train_config_from_json_text(const std::string& text) {
  try {
    return parse_train_config(json::parse(text));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
}

std::string train_config_to_json(const TrainConfig& cfg) {
  return train_config_json(cfg).dump(2);
}

TrainConfig default_grid_base() {
  TrainConfig cfg;
  cfg.data.n_samples = 20000;
  cfg.model.hidden_dim = 8;
  cfg.model.expert_count = 4;
  cfg.model.experts_per_task = 2;
  cfg.epochs = 6;
  cfg.batch_size = 512;
  return cfg;
}

GridSpec grid_spec_from_json_file(const std::string& path) {
  const json j = load_json_file(path);
  GridSpec spec;
  try {
    if (j.contains("base")) spec.base = parse_train_config(j.at("base"));
    if (j.contains("methods")) {
      spec.methods.clear();
      for (const auto& m : j.at("methods"))
        spec.methods.push_back(method_from_string(m.get<std::string>()));
    }
    if (j.contains("models")) {
      spec.models.clear();
      for (const auto& m : j.at("models"))
        spec.models.push_back(model_kind_from_string(m.get<std::string>()));
    }
    if (j.contains("dataset_seeds"))
      spec.dataset_seeds = j.at("dataset_seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("run_seeds"))
      spec.run_seeds = j.at("run_seeds").get<std::vector<std::uint64_t>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid grid spec: ") + e.what());
  }
  return spec;
}

// ---------------------------------------------------------------------------
// per-method stepping

namespace {

// Applies one plain optimizer step to a flattened parameter group.
void plain_apply_shared(ParamSet& p, OptimizerState& st, std::span<const double> g) {
  std::vector<double> vals = p.shared_values();
  const std::vector<double> old = vals;
  st.plain_step(vals, g);
  for (std::size_t k = 0; k < vals.size(); ++k) vals[k] -= old[k];
  p.add_to_shared(vals);
}

void plain_apply_task(ParamSet& p, int task, OptimizerState& st, std::span<const double> g) {
  std::vector<double> vals = p.task_values(task);
  const std::vector<double> old = vals;
  st.plain_step(vals, g);
  for (std::size_t k = 0; k < vals.size(); ++k) vals[k] -= old[k];
  p.add_to_task(task, vals);
}

// Owns the optimizer states and method machinery for one training run; the
// same stepper drives both the ranking loop and the toy runner.
class MethodStepper {
 public:
  MethodStepper(const TrainConfig& cfg, std::int64_t shared_dim,
                const std::vector<std::int64_t>& task_dims, std::uint64_t seed)
      : cfg_(cfg), pc_rng_(seed_combine(seed, 0x70636772)) {
    const int n = static_cast<int>(task_dims.size());
    if (cfg.solve_every < 1) throw ConfigError("solve_every must be >= 1");
    if (cfg_.method == Method::pub) {
      PubStepConfig pc;
      pc.solve_every = cfg.solve_every;
      pc.solver = cfg.solver;
      pc.umm = cfg.umm;
      pub_.emplace(cfg.optim, pc, shared_dim, task_dims);
    } else {
      shared_.emplace(cfg.optim, shared_dim);
      for (std::int64_t d : task_dims) tasks_.emplace_back(cfg.optim, d);
      if (cfg_.method == Method::uncertainty) {
        s_.assign(n, 0.0);
        s_state_.emplace(cfg.optim, n);
      }
      nash_cached_.alpha.assign(n, 1.0);
    }
  }

  struct Outcome {
    std::vector<double> alpha;
    std::vector<double> combined_grad;
  };

  Outcome step(ParamSet& params, const std::vector<std::vector<double>>& gs,
               const std::vector<std::vector<double>>& gt,
               std::span<const double> losses) {
    const int n = static_cast<int>(gs.size());
    Outcome out;

    if (cfg_.method == Method::pub) {
      PubStepResult r = pub_->step(params, gs, gt);
      out.alpha = r.solution.alpha;
      out.combined_grad = std::move(r.combined_grad);
      return out;
    }

    std::vector<double> task_scale(n, 1.0);
    switch (cfg_.method) {
      case Method::ls:
        out.alpha.assign(n, 1.0);
        out.combined_grad = combine(gs, out.alpha);
        break;
      case Method::uncertainty: {
        const UncertaintyResult u = uncertainty_weights(s_, losses);
        out.alpha = u.weights;
        out.combined_grad = combine(gs, out.alpha);
        task_scale = u.weights;
        std::vector<double> svals = s_;
        s_state_->plain_step(svals, u.s_grad);
        s_ = svals;
        break;
      }
      case Method::mgda: {
        const WeightSolution sol = solve_min_norm(gs);
        out.alpha = sol.alpha;
        out.combined_grad = combine(gs, out.alpha);
        break;
      }
      case Method::pcgrad: {
        const auto surgered = pcgrad(gs, pc_rng_);
        out.alpha.assign(n, 1.0);
        out.combined_grad = combine(surgered, out.alpha);
        break;
      }
      case Method::cagrad: {
        out.combined_grad = cagrad(gs, cfg_.cagrad_c);
        if (cfg_.cagrad_c == 0.0) {
          out.alpha.assign(n, 1.0 / n);
        } else {
          const GramMatrix k = GramMatrix::from_columns(gs, GramSource::gradients);
          out.alpha = cagrad_dual_weights(k, cfg_.cagrad_c);
        }
        break;
      }
      case Method::imtl_g: {
        const WeightSolution sol = imtl_g(gs);
        out.alpha = sol.alpha;
        out.combined_grad = combine(gs, out.alpha);
        break;
      }
      case Method::nashmtl: {
        if (step_count_ % cfg_.solve_every == 0)
          nash_cached_ = solve_bargaining(
              GramMatrix::from_columns(gs, GramSource::gradients), cfg_.solver);
        out.alpha = nash_cached_.alpha;
        out.combined_grad = combine(gs, out.alpha);
        break;
      }
      default:
        throw ContractError("unhandled method");
    }

    plain_apply_shared(params, *shared_, out.combined_grad);
    for (int i = 0; i < n; ++i) {
      if (gt[i].empty()) continue;
      std::vector<double> g = gt[i];
      if (task_scale[i] != 1.0)
        for (double& v : g) v *= task_scale[i];
      plain_apply_task(params, i, tasks_[static_cast<std::size_t>(i)], g);
    }
    ++step_count_;
    return out;
  }

  const std::vector<double>& uncertainty_s() const { return s_; }

 private:
  TrainConfig cfg_;
  Rng pc_rng_;
  std::optional<PubEngine> pub_;
  std::optional<OptimizerState> shared_;
  std::vector<OptimizerState> tasks_;
  std::optional<OptimizerState> s_state_;
  std::vector<double> s_;
  WeightSolution nash_cached_;
  std::int64_t step_count_ = 0;
};

}  // namespace

// ---------------------------------------------------------------------------
// training

namespace {

void validate_train_config(const TrainConfig& cfg) {
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (cfg.solve_every < 1) throw ConfigError("solve_every must be >= 1");
  if (cfg.model.task_count < 1 || cfg.model.task_count > 2)
    throw ConfigError("the ranking pipeline supports task_count 1 or 2");
  if (cfg.weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
}

json result_to_json(const RunResult& rr, const TrainConfig& cfg, std::uint64_t seed) {
  json epochs = json::array();
  for (const auto& e : rr.val_auc)
    epochs.push_back({{"per_task", e.per_task}, {"average", e.average}});
  json j;
  j["schema"] = "mtopt-result-v1";
  j["status"] = rr.status;
  j["diverged_step"] = rr.diverged_step;
  j["dataset_id"] = rr.summary.dataset_id;
  j["model_kind"] = rr.summary.model_kind;
  j["method"] = rr.summary.method;
  j["seed"] = seed;
  j["steps_per_epoch"] = rr.steps_per_epoch;
  j["best_epoch"] = rr.best_epoch;
  j["val_auc"] = epochs;
  j["best_avg_auc"] = rr.summary.avg_auc;
  j["mean_sim_task"] = rr.summary.mean_sim_task;
  j["mean_sim_share"] = rr.summary.mean_sim_share;
  j["diff"] = rr.summary.diff;
  j["trace_path"] = "trace.jsonl";
  j["config"] = train_config_json(cfg);
  return j;
}

}  // namespace

RunResult run_training(const TrainConfig& cfg, std::uint64_t seed,
                       const std::string& out_dir) {
  validate_train_config(cfg);
  fs::create_directories(out_dir);

  TrainConfig effective = cfg;
  effective.model.input_dim = cfg.data.dim;
  const int n = effective.model.task_count;

  const RankingDataset ds = gen_ranking(effective.data);
  MultiTaskModel model(effective.model, seed);
  ParamSet& params = model.params();

  // 90/10 split by deterministic row hash, keyed by the dataset seed
  std::vector<int> train_idx, val_idx;
  const std::uint64_t split_key = splitmix64(effective.data.seed ^ 0x5eed0011ULL);
  for (int r = 0; r < ds.n; ++r) {
    if (splitmix64(static_cast<std::uint64_t>(r) ^ split_key) % 10 == 0)
      val_idx.push_back(r);
    else
      train_idx.push_back(r);
  }

  std::vector<std::int64_t> task_dims;
  for (int j = 0; j < n; ++j) task_dims.push_back(params.task_dim(j));
  MethodStepper stepper(effective, params.shared_dim(), task_dims, seed);

  const int d = ds.dim;
  auto labels_of = [&](int task) -> const std::vector<double>& {
    return task == 0 ? ds.y_ctr : ds.y_ctcvr;
  };

  RunResult rr;
  rr.status = "ok";
  rr.steps_per_epoch =
      static_cast<int>((train_idx.size() + cfg.batch_size - 1) / cfg.batch_size);
  rr.trace_path = out_dir + "/trace.jsonl";
  rr.summary.dataset_id = "ds" + std::to_string(effective.data.seed);
  rr.summary.model_kind = to_string(effective.model.kind);
  rr.summary.method = to_string(effective.method);
  rr.summary.seed = seed;

  TraceWriter trace(rr.trace_path, n);
  std::vector<TraceRecord> records;
  records.reserve(static_cast<std::size_t>(rr.steps_per_epoch) * effective.epochs);

  std::vector<std::vector<double>> gs(n), gt(n);
  std::vector<double> loss_values(n);
  double best_avg = -1.0;
  int gstep = 0;
  bool diverged = false;

  for (int epoch = 0; epoch < effective.epochs && !diverged; ++epoch) {
    std::vector<int> order = train_idx;
    Rng shuffle_rng(seed_combine(seed_combine(seed, 0xba7c4), static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    for (std::size_t pos = 0; pos < order.size() && !diverged; pos += cfg.batch_size) {
      const int b = static_cast<int>(
          std::min<std::size_t>(cfg.batch_size, order.size() - pos));
      std::vector<double> x(static_cast<std::size_t>(b) * d);
      std::vector<std::vector<double>> y(n, std::vector<double>(b));
      for (int r = 0; r < b; ++r) {
        const int row = order[pos + r];
        std::copy_n(&ds.features[static_cast<std::size_t>(row) * d], d,
                    &x[static_cast<std::size_t>(r) * d]);
        for (int j = 0; j < n; ++j) y[j][r] = labels_of(j)[row];
      }
      Tensor xb = Tensor::matrix(b, d, std::move(x));

      Tape tape;
      std::vector<Tensor> logits = model.forward_multi(tape, xb);
      std::vector<Tensor> losses;
      losses.reserve(n);
      for (int j = 0; j < n; ++j)
        losses.push_back(bce_with_logits(logits[j], Tensor::matrix(b, 1, y[j])));
      for (int j = 0; j < n; ++j) {
        loss_values[j] = losses[j].value();
        if (!std::isfinite(loss_values[j])) {
          rr.status = "diverged";
          rr.diverged_step = gstep;
          diverged = true;
        }
      }
      if (diverged) break;

      for (int j = 0; j < n; ++j) {
        tape.backward(losses[j]);
        gs[j] = params.shared_grads();
        gt[j] = params.task_grads(j);
      }
      if (effective.weight_decay > 0.0) {
        const std::vector<double> th = params.shared_values();
        for (int j = 0; j < n; ++j) {
          for (std::size_t k = 0; k < th.size(); ++k)
            gs[j][k] += 2.0 * effective.weight_decay / n * th[k];
          const std::vector<double> tt = params.task_values(j);
          for (std::size_t k = 0; k < tt.size(); ++k)
            gt[j][k] += 2.0 * effective.weight_decay * tt[k];
        }
      }

      const std::vector<double> theta_before = params.shared_values();
      std::vector<std::vector<double>> task_before(n);
      for (int j = 0; j < n; ++j) task_before[j] = params.task_values(j);

      const MethodStepper::Outcome outcome = stepper.step(params, gs, gt, loss_values);

      TraceRecord rec;
      rec.step = gstep;
      rec.task_losses = loss_values;
      rec.alpha = outcome.alpha;
      {
        std::vector<double> u_share = params.shared_values();
        for (std::size_t k = 0; k < u_share.size(); ++k)
          u_share[k] = theta_before[k] - u_share[k];
        rec.sim_share = cosine(outcome.combined_grad, u_share);
        rec.update_norm_share = linalg::l2_norm(u_share);
        double st = 0.0;
        int counted = 0;
        for (int j = 0; j < n; ++j) {
          if (gt[j].empty()) continue;
          std::vector<double> u_task = params.task_values(j);
          for (std::size_t k = 0; k < u_task.size(); ++k)
            u_task[k] = task_before[j][k] - u_task[k];
          st += cosine(gt[j], u_task);
          ++counted;
        }
        rec.sim_task = counted ? st / counted : 0.0;
        rec.grad_norm_share.resize(n);
        for (int j = 0; j < n; ++j) rec.grad_norm_share[j] = linalg::l2_norm(gs[j]);
      }
      trace.append(rec);
      records.push_back(std::move(rec));
      ++gstep;
    }
    if (diverged) break;

    // end-of-epoch validation
    std::vector<double> xv(val_idx.size() * static_cast<std::size_t>(d));
    for (std::size_t r = 0; r < val_idx.size(); ++r)
      std::copy_n(&ds.features[static_cast<std::size_t>(val_idx[r]) * d], d,
                  &xv[r * static_cast<std::size_t>(d)]);
    const Tensor xvt = Tensor::matrix(static_cast<int>(val_idx.size()), d, std::move(xv));
    const auto logits = model.predict_logits(xvt);
    EpochAuc ea;
    for (int j = 0; j < n; ++j) {
      std::vector<double> yv(val_idx.size());
      for (std::size_t r = 0; r < val_idx.size(); ++r) yv[r] = labels_of(j)[val_idx[r]];
      ea.per_task.push_back(auc(logits[static_cast<std::size_t>(j)], yv));
    }
    ea.average = std::accumulate(ea.per_task.begin(), ea.per_task.end(), 0.0) / n;
    rr.val_auc.push_back(ea);
    if (ea.average > best_avg) {
      best_avg = ea.average;
      rr.best_epoch = epoch;
    }
  }
  trace.close();

  if (rr.status == "ok") {
    const std::size_t window =
        static_cast<std::size_t>(rr.best_epoch + 1) * rr.steps_per_epoch;
    double st = 0.0, ss = 0.0;
    const std::size_t m = std::min(window, records.size());
    for (std::size_t k = 0; k < m; ++k) {
      st += records[k].sim_task;
      ss += records[k].sim_share;
    }
    rr.summary.mean_sim_task = m ? st / m : 0.0;
    rr.summary.mean_sim_share = m ? ss / m : 0.0;
    rr.summary.diff = diff_metric(rr.summary.mean_sim_task, rr.summary.mean_sim_share);
    rr.summary.avg_auc = best_avg;
  }

  model.save_checkpoint(out_dir + "/model.json");
  std::ofstream rf(out_dir + "/result.json");
  if (!rf) throw ConfigError("cannot write result.json in " + out_dir);
  rf << result_to_json(rr, cfg, seed).dump(2) << "\n";
  rf.close();

  if (rr.status == "diverged")
    throw DivergenceError("training diverged at step " + std::to_string(rr.diverged_step) +
                          " (see " + out_dir + "/result.json)");
  return rr;
}

// ---------------------------------------------------------------------------
// toy runner

std::vector<ToyTrajectory> run_toy(const ToyRunConfig& cfg, const std::string& out_dir) {
  if (cfg.toy.init_points.empty()) throw ConfigError("toy: need at least one init point");
  if (!out_dir.empty()) fs::create_directories(out_dir);

  TrainConfig tc;
  tc.optim = cfg.optim;
  tc.method = cfg.method;
  tc.umm = cfg.umm;
  tc.solver = cfg.solver;
  tc.solve_every = cfg.solve_every;
  tc.cagrad_c = cfg.cagrad_c;

  std::vector<ToyTrajectory> out;
  for (std::size_t k = 0; k < cfg.toy.init_points.size(); ++k) {
    ParamSet params;
    params.shared.push_back({"theta", Tensor::row({cfg.toy.init_points[k][0],
                                                   cfg.toy.init_points[k][1]})});
    params.per_task.resize(2);  // two tasks, no task-specific parameters

    MethodStepper stepper(tc, 2, {0, 0}, cfg.seed + k);
    ToyTrajectory traj;
    traj.init = cfg.toy.init_points[k];

    auto theta_of = [&]() {
      const auto& v = params.shared[0].value.data;
      return std::array<double, 2>{v[0], v[1]};
    };
    ToyEval ev = toy_losses(theta_of(), cfg.toy);
    traj.points.push_back({theta_of()[0], theta_of()[1], ev.l1, ev.l2});

    for (int step = 0; step < cfg.toy.steps; ++step) {
      ev = toy_losses(theta_of(), cfg.toy);
      const std::vector<std::vector<double>> gs = {{ev.g1[0], ev.g1[1]},
                                                   {ev.g2[0], ev.g2[1]}};
      const std::vector<std::vector<double>> gt = {{}, {}};
      const std::vector<double> losses = {ev.l1, ev.l2};
      stepper.step(params, gs, gt, losses);
      const auto th = theta_of();
      const ToyEval e2 = toy_losses(th, cfg.toy);
      traj.points.push_back({th[0], th[1], e2.l1, e2.l2});
    }
    traj.final_theta = theta_of();
    traj.final_distance_to_front = toy_distance_to_front(traj.final_theta, cfg.toy);

    if (!out_dir.empty()) {
      std::ofstream f(out_dir + "/trajectory_" + std::to_string(k) + ".csv");
      if (!f) throw ConfigError("cannot write trajectory csv in " + out_dir);
      f << "step,x,y,l1,l2\n";
      f.precision(17);
      for (std::size_t s = 0; s < traj.points.size(); ++s)
        f << s << "," << traj.points[s][0] << "," << traj.points[s][1] << ","
          << traj.points[s][2] << "," << traj.points[s][3] << "\n";
    }
    out.push_back(std::move(traj));
  }

  if (!out_dir.empty()) {
    json j;
    j["schema"] = "mtopt-toy-v1";
    j["method"] = to_string(cfg.method);
    j["optimizer"] = to_string(cfg.optim.kind);
    j["kappa"] = cfg.toy.kappa;
    j["steps"] = cfg.toy.steps;
    json per = json::array();
    for (const auto& t : out)
      per.push_back({{"init", {t.init[0], t.init[1]}},
                     {"final", {t.final_theta[0], t.final_theta[1]}},
                     {"distance_to_front", t.final_distance_to_front}});
    j["trajectories"] = per;
    std::ofstream f(out_dir + "/toy_result.json");
    f << j.dump(2) << "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// grid + report

namespace {

struct CellRef {
  std::string name;
  Method method;
  ModelKind model;
  std::uint64_t dataset_seed;
  std::uint64_t run_seed;
};

std::vector<CellRef> grid_cells(const GridSpec& spec) {
  std::vector<CellRef> cells;
  for (Method m : spec.methods)
    for (ModelKind mk : spec.models)
      for (std::uint64_t dseed : spec.dataset_seeds)
        for (std::uint64_t rseed : spec.run_seeds) {
          CellRef c;
          c.method = m;
          c.model = mk;
          c.dataset_seed = dseed;
          c.run_seed = rseed;
          c.name = to_string(m) + "_" + to_string(mk) + "_ds" + std::to_string(dseed) +
                   "_s" + std::to_string(rseed);
          cells.push_back(std::move(c));
        }
  std::sort(cells.begin(), cells.end(),
            [](const CellRef& a, const CellRef& b) { return a.name < b.name; });
  return cells;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

GridOutcome run_grid(const GridSpec& spec, const std::string& out_dir, int threads) {
  validate_train_config(spec.base);
  if (threads < 1) throw ConfigError("threads must be >= 1");
  fs::create_directories(out_dir);

  const std::vector<CellRef> cells = grid_cells(spec);
  {
    json manifest;
    manifest["schema"] = "mtopt-grid-v1";
    manifest["base"] = train_config_json(spec.base);
    json names = json::array();
    for (const auto& c : cells) names.push_back(c.name);
    manifest["cells"] = names;
    std::ofstream f(out_dir + "/grid_manifest.json");
    f << manifest.dump(2) << "\n";
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      const CellRef& c = cells[i];
      const std::string cell_dir = out_dir + "/" + c.name;
      try {
        TrainConfig cfg = spec.base;
        cfg.method = c.method;
        cfg.model.kind = c.model;
        cfg.data.seed = c.dataset_seed;
        run_training(cfg, c.run_seed, cell_dir);
      } catch (const std::exception& e) {
        fs::create_directories(cell_dir);
        std::ofstream f(cell_dir + "/error.txt");
        f << e.what() << "\n";
      }
    }
  };
  std::vector<std::thread> pool;
  const int nthreads = std::min<std::size_t>(threads, cells.size());
  pool.reserve(static_cast<std::size_t>(nthreads));
  for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  return analyze_grid(out_dir);
}

GridOutcome analyze_grid(const std::string& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("not a directory: " + dir);

  std::vector<std::string> cell_dirs;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory() &&
        (fs::exists(e.path() / "result.json") || fs::exists(e.path() / "error.txt")))
      cell_dirs.push_back(e.path().filename().string());
  std::sort(cell_dirs.begin(), cell_dirs.end());
  if (cell_dirs.empty()) throw ConfigError("no grid cells found in " + dir);

  GridOutcome outcome;
  outcome.cells_total = static_cast<int>(cell_dirs.size());

  std::vector<ExperimentSummary> cell_summaries;
  std::vector<std::string> failed;
  for (const std::string& name : cell_dirs) {
    const fs::path cell = fs::path(dir) / name;
    if (fs::exists(cell / "error.txt") || !fs::exists(cell / "result.json")) {
      failed.push_back(name);
      continue;
    }
    const json r = load_json_file((cell / "result.json").string());
    if (r.value("status", "") != "ok") {
      failed.push_back(name);
      continue;
    }
    ExperimentSummary s;
    s.dataset_id = r.at("dataset_id").get<std::string>();
    s.model_kind = r.at("model_kind").get<std::string>();
    s.method = r.at("method").get<std::string>();
    s.seed = r.at("seed").get<std::uint64_t>();
    s.avg_auc = r.at("best_avg_auc").get<double>();

    // recompute the similarity summary purely from the trace
    const TraceFile tf = read_trace((cell / "trace.jsonl").string());
    const int best_epoch = r.at("best_epoch").get<int>();
    const int spe = r.at("steps_per_epoch").get<int>();
    const std::size_t window = static_cast<std::size_t>(best_epoch + 1) * spe;
    const std::size_t m = std::min(window, tf.records.size());
    double st = 0.0, ss = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      st += tf.records[k].sim_task;
      ss += tf.records[k].sim_share;
    }
    s.mean_sim_task = m ? st / m : 0.0;
    s.mean_sim_share = m ? ss / m : 0.0;
    s.diff = diff_metric(s.mean_sim_task, s.mean_sim_share);
    cell_summaries.push_back(std::move(s));
  }
  outcome.cells_failed = static_cast<int>(failed.size());

  // aggregate cells over run seeds: one summary per (dataset, model, method)
  std::map<std::tuple<std::string, std::string, std::string>,
           std::vector<const ExperimentSummary*>>
      agg;
  for (const auto& s : cell_summaries)
    agg[{s.dataset_id, s.model_kind, s.method}].push_back(&s);
  std::vector<ExperimentSummary> method_summaries;
  for (const auto& [key, group] : agg) {
    ExperimentSummary s;
    s.dataset_id = std::get<0>(key);
    s.model_kind = std::get<1>(key);
    s.method = std::get<2>(key);
    for (const auto* c : group) {
      s.avg_auc += c->avg_auc;
      s.mean_sim_task += c->mean_sim_task;
      s.mean_sim_share += c->mean_sim_share;
      s.diff += c->diff;
    }
    const double k = static_cast<double>(group.size());
    s.avg_auc /= k;
    s.mean_sim_task /= k;
    s.mean_sim_share /= k;
    s.diff /= k;
    method_summaries.push_back(std::move(s));
  }

  const PairwiseResult pw = pairwise_indicators(method_summaries);
  std::array<std::array<double, 2>, 2> table{{{0.0, 0.0}, {0.0, 0.0}}};
  for (const auto& [x, yv] : pw.pairs)
    table[static_cast<std::size_t>(1 - x)][static_cast<std::size_t>(1 - yv)] += 1.0;

  json report;
  report["schema"] = "mtopt-report-v1";
  report["aggregation"] =
      "per-step cosine of concatenated partition gradient/update vectors, averaged over "
      "the collection window (first step to end of best-validation epoch); per-run Diff "
      "from the averaged sims; runs averaged over seeds per (dataset, model, method)";
  report["cells_total"] = outcome.cells_total;
  report["cells_failed"] = outcome.cells_failed;
  report["failed_cells"] = failed;
  report["pairs"] = pw.pairs.size();
  report["pairs_dropped"] = pw.dropped;
  report["confusion"] = {{table[0][0], table[0][1]}, {table[1][0], table[1][1]}};
  double reverse = 0.0;
  if (!pw.pairs.empty()) reverse = (table[0][1] + table[1][0]) / static_cast<double>(pw.pairs.size());
  report["reverse_fraction"] = reverse;
  try {
    const Chi2Result chi = chi_square_2x2(table);
    report["chi2"] = chi.chi2;
    report["chi2_bucket"] = to_string(chi.bucket);
  } catch (const UndefinedStatError&) {
    report["chi2"] = nullptr;
    report["chi2_bucket"] = "undefined";
  }

  // per-method similarity table with Welch t vs the LS cells
  std::map<std::string, std::vector<const ExperimentSummary*>> by_method;
  for (const auto& s : cell_summaries) by_method[s.method].push_back(&s);
  json sim_table = json::array();
  const auto ls_it = by_method.find("ls");
  auto collect_sims = [](const std::vector<const ExperimentSummary*>& v, bool task) {
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto* s : v) out.push_back(task ? s->mean_sim_task : s->mean_sim_share);
    return out;
  };
  for (const auto& [method, group] : by_method) {
    json row;
    row["method"] = method;
    double mt = 0.0, ms = 0.0;
    for (const auto* s : group) {
      mt += s->mean_sim_task;
      ms += s->mean_sim_share;
    }
    row["mean_sim_task"] = mt / group.size();
    row["mean_sim_share"] = ms / group.size();
    if (method != "ls" && ls_it != by_method.end() && ls_it->second.size() >= 2 &&
        group.size() >= 2) {
      const auto a_task = collect_sims(group, true);
      const auto b_task = collect_sims(ls_it->second, true);
      const auto a_share = collect_sims(group, false);
      const auto b_share = collect_sims(ls_it->second, false);
      const TTestResult tt = t_test_independent(a_task, b_task);
      const TTestResult ts = t_test_independent(a_share, b_share);
      row["t_vs_ls_task"] = tt.t;
      row["p_vs_ls_task"] = to_string(tt.bucket);
      row["t_vs_ls_share"] = ts.t;
      row["p_vs_ls_share"] = to_string(ts.bucket);
    } else {
      row["t_vs_ls_task"] = nullptr;
      row["p_vs_ls_task"] = "";
      row["t_vs_ls_share"] = nullptr;
      row["p_vs_ls_share"] = "";
    }
    sim_table.push_back(row);
  }
  report["similarity_table"] = sim_table;

  json groups = json::array();
  for (const auto& s : method_summaries)
    groups.push_back({{"dataset_id", s.dataset_id},
                      {"model_kind", s.model_kind},
                      {"method", s.method},
                      {"avg_auc", s.avg_auc},
                      {"mean_sim_task", s.mean_sim_task},
                      {"mean_sim_share", s.mean_sim_share},
                      {"diff", s.diff}});
  report["group_summaries"] = groups;

  outcome.report_json_path = dir + "/report.json";
  outcome.report_csv_path = dir + "/report.csv";
  {
    std::ofstream f(outcome.report_json_path);
    if (!f) throw ConfigError("cannot write report.json in " + dir);
    f << report.dump(2) << "\n";
  }
  {
    std::ofstream f(outcome.report_csv_path);
    if (!f) throw ConfigError("cannot write report.csv in " + dir);
    f << "# confusion_matrix (rows x=1,x=0; cols y=1,y=0)\n";
    f << ",y=1,y=0\n";
    f << "x=1," << fmt_double(table[0][0]) << "," << fmt_double(table[0][1]) << "\n";
    f << "x=0," << fmt_double(table[1][0]) << "," << fmt_double(table[1][1]) << "\n";
    f << "\n# similarity_table\n";
    f << "method,mean_sim_task,p_vs_ls_task,mean_sim_share,p_vs_ls_share\n";
    for (const auto& row : sim_table)
      f << row.at("method").get<std::string>() << ","
        << fmt_double(row.at("mean_sim_task").get<double>()) << ","
        << row.at("p_vs_ls_task").get<std::string>() << ","
        << fmt_double(row.at("mean_sim_share").get<double>()) << ","
        << row.at("p_vs_ls_share").get<std::string>() << "\n";
  }
  return outcome;
}

}  // namespace mtopt
