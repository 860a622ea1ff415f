#include "mtopt/optimizer.hpp"

#include <cmath>

#include "mtopt/errors.hpp"
#include "mtopt/linalg.hpp"

namespace mtopt {

std::string to_string(OptKind k) {
  switch (k) {
    case OptKind::adam: return "adam";
    case OptKind::adagrad: return "adagrad";
    case OptKind::rmsprop: return "rmsprop";
    case OptKind::sgd: return "sgd";
  }
  return "unknown";
}

OptKind opt_kind_from_string(const std::string& s) {
  if (s == "adam") return OptKind::adam;
  if (s == "adagrad") return OptKind::adagrad;
  if (s == "rmsprop") return OptKind::rmsprop;
  if (s == "sgd") return OptKind::sgd;
  throw ConfigError("unknown optimizer kind: " + s);
}

OptimizerState::OptimizerState(OptimizerConfig cfg, std::int64_t dim)
    : cfg_(cfg), dim_(dim) {
  if (cfg_.eps <= 0.0) throw ConfigError("optimizer: eps must be > 0");
  if (dim_ < 0) throw ContractError("optimizer: negative dimension");
  const auto n = static_cast<std::size_t>(dim_);
  switch (cfg_.kind) {
    case OptKind::adam:
      m_.assign(n, 0.0);
      v_.assign(n, 0.0);
      break;
    case OptKind::adagrad:
    case OptKind::rmsprop:
      accum_.assign(n, 0.0);
      break;
    case OptKind::sgd:
      break;
  }
}

std::vector<double> OptimizerState::update_column(std::span<const double> grad) const {
  if (static_cast<std::int64_t>(grad.size()) != dim_)
    throw ContractError("optimizer: gradient length mismatch");
  std::vector<double> out(grad.size());
  switch (cfg_.kind) {
    case OptKind::sgd:
      out.assign(grad.begin(), grad.end());
      break;
    case OptKind::adam: {
      double c1 = 1.0, c2 = 1.0;
      if (cfg_.bias_correct) {
        c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_ + 1));
        c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_ + 1));
      }
      for (std::size_t i = 0; i < grad.size(); ++i) {
        const double mhat = (cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i]) / c1;
        const double vhat = (cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i]) / c2;
        out[i] = mhat / (std::sqrt(vhat) + cfg_.eps);
      }
      break;
    }
    case OptKind::adagrad:
    case OptKind::rmsprop:
      for (std::size_t i = 0; i < grad.size(); ++i) {
        const double a = cfg_.beta * accum_[i] + (1.0 - cfg_.beta) * grad[i] * grad[i];
        out[i] = grad[i] / (std::sqrt(a) + cfg_.eps);
      }
      break;
  }
  return out;
}

void OptimizerState::commit_moments(std::span<const double> grad) {
  if (static_cast<std::int64_t>(grad.size()) != dim_)
    throw ContractError("optimizer: gradient length mismatch");
  switch (cfg_.kind) {
    case OptKind::sgd:
      break;
    case OptKind::adam:
      for (std::size_t i = 0; i < grad.size(); ++i) {
        m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
        v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
      }
      break;
    case OptKind::adagrad:
    case OptKind::rmsprop:
      for (std::size_t i = 0; i < grad.size(); ++i)
        accum_[i] = cfg_.beta * accum_[i] + (1.0 - cfg_.beta) * grad[i] * grad[i];
      break;
  }
  ++step_count_;
}

void OptimizerState::plain_step(std::span<double> theta, std::span<const double> grad) {
  if (theta.size() != grad.size()) throw ContractError("optimizer: theta/grad mismatch");
  if (cfg_.moment_update_before) {
    commit_moments(grad);
    // the committed moments drive the update directly
    switch (cfg_.kind) {
      case OptKind::sgd:
        for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= cfg_.lr * grad[i];
        break;
      case OptKind::adam:
        for (std::size_t i = 0; i < theta.size(); ++i)
          theta[i] -= cfg_.lr * m_[i] / (std::sqrt(v_[i]) + cfg_.eps);
        break;
      case OptKind::adagrad:
      case OptKind::rmsprop:
        for (std::size_t i = 0; i < theta.size(); ++i)
          theta[i] -= cfg_.lr * grad[i] / (std::sqrt(accum_[i]) + cfg_.eps);
        break;
    }
  } else {
    const std::vector<double> col = update_column(grad);
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= cfg_.lr * col[i];
    commit_moments(grad);
  }
}

std::vector<std::vector<double>> compute_task_updates(
    const OptimizerState& state, const std::vector<std::vector<double>>& task_grads) {
  std::vector<std::vector<double>> cols;
  cols.reserve(task_grads.size());
  for (const auto& g : task_grads) cols.push_back(state.update_column(g));
  return cols;
}

PubEngine::PubEngine(OptimizerConfig opt, PubStepConfig cfg, std::int64_t shared_dim,
                     const std::vector<std::int64_t>& task_dims)
    : opt_(opt), cfg_(cfg), shared_(opt, shared_dim), umm_(cfg.umm) {
  if (cfg_.solve_every < 1) throw ConfigError("pub: solve_every must be >= 1");
  per_task_.reserve(task_dims.size());
  for (std::int64_t d : task_dims) per_task_.emplace_back(opt, d);
  cached_.alpha.assign(task_dims.size(), 1.0);  // alpha^0 = (1,...,1)
  cached_.status = SolveStatus::converged;
}

PubStepResult PubEngine::step(ParamSet& params,
                              const std::vector<std::vector<double>>& shared_task_grads,
                              const std::vector<std::vector<double>>& task_grads) {
  const int n = static_cast<int>(shared_task_grads.size());
  if (n == 0) throw ContractError("pub: no task gradients");
  if (static_cast<std::size_t>(n) != per_task_.size() ||
      task_grads.size() != per_task_.size())
    throw ContractError("pub: task count mismatch");

  if (opt_.moment_update_before)
    shared_.commit_moments(combine(shared_task_grads, cached_.alpha));

  // per-task hypothetical updates on frozen moments, then UMM
  std::vector<std::vector<double>> cols = compute_task_updates(shared_, shared_task_grads);
  const std::vector<double> theta = params.shared_values();
  for (int i = 0; i < n; ++i) umm_.apply(i, cols[i], theta, shared_task_grads[i]);

  PubStepResult result;
  const GramMatrix gram = GramMatrix::from_columns(cols, GramSource::updates);
  if (step_count_ % cfg_.solve_every == 0) {
    cached_ = solve_bargaining(gram, cfg_.solver);
    result.solved_this_step = true;
  }
  result.solution = cached_;

  result.joint_update = combine(cols, cached_.alpha);
  std::vector<double> delta(result.joint_update.size());
  for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = -opt_.lr * result.joint_update[i];
  params.add_to_shared(delta);

  result.combined_grad = combine(shared_task_grads, cached_.alpha);
  if (!opt_.moment_update_before) shared_.commit_moments(result.combined_grad);

  for (int i = 0; i < n; ++i) {
    std::vector<double> tv = params.task_values(i);
    per_task_[static_cast<std::size_t>(i)].plain_step(tv, task_grads[i]);
    std::vector<double> td = params.task_values(i);
    for (std::size_t k = 0; k < td.size(); ++k) td[k] = tv[k] - td[k];
    params.add_to_task(i, td);
  }

  ++step_count_;
  return result;
}

}  // namespace mtopt
