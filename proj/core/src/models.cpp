#include "mtopt/models.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mtopt/errors.hpp"
#include "mtopt/rng.hpp"

namespace mtopt {

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::shared_bottom: return "shared_bottom";
    case ModelKind::mmoe: return "mmoe";
    case ModelKind::ple: return "ple";
  }
  return "unknown";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "shared_bottom") return ModelKind::shared_bottom;
  if (s == "mmoe") return ModelKind::mmoe;
  if (s == "ple") return ModelKind::ple;
  throw ConfigError("unknown model kind: " + s);
}

std::int64_t ParamSet::shared_dim() const {
  std::int64_t d = 0;
  for (const auto& nt : shared) d += nt.value.size();
  return d;
}

std::int64_t ParamSet::task_dim(int task) const {
  std::int64_t d = 0;
  for (const auto& nt : per_task[static_cast<std::size_t>(task)]) d += nt.value.size();
  return d;
}

void ParamSet::watch_all(Tape& tape) {
  for (auto& nt : shared) tape.watch(nt.value);
  for (auto& group : per_task)
    for (auto& nt : group) tape.watch(nt.value);
}

namespace {

std::vector<double> collect(const std::vector<NamedTensor>& group, bool grads) {
  std::vector<double> out;
  for (const auto& nt : group) {
    if (grads) {
      if (nt.value.grad.empty())
        out.insert(out.end(), nt.value.data.size(), 0.0);
      else
        out.insert(out.end(), nt.value.grad.begin(), nt.value.grad.end());
    } else {
      out.insert(out.end(), nt.value.data.begin(), nt.value.data.end());
    }
  }
  return out;
}

void scatter_add(std::vector<NamedTensor>& group, std::span<const double> delta) {
  std::size_t off = 0;
  for (auto& nt : group) {
    for (double& v : nt.value.data) v += delta[off++];
  }
  if (off != delta.size()) throw ContractError("ParamSet: delta length mismatch");
}

}  // namespace

std::vector<double> ParamSet::shared_values() const { return collect(shared, false); }
std::vector<double> ParamSet::shared_grads() const { return collect(shared, true); }
void ParamSet::add_to_shared(std::span<const double> delta) { scatter_add(shared, delta); }

std::vector<double> ParamSet::task_values(int task) const {
  return collect(per_task[static_cast<std::size_t>(task)], false);
}
std::vector<double> ParamSet::task_grads(int task) const {
  return collect(per_task[static_cast<std::size_t>(task)], true);
}
void ParamSet::add_to_task(int task, std::span<const double> delta) {
  scatter_add(per_task[static_cast<std::size_t>(task)], delta);
}

namespace {

void validate(const ModelSpec& spec) {
  if (spec.input_dim < 1 || spec.hidden_dim < 1 || spec.task_count < 1)
    throw ConfigError("ModelSpec: dimensions and task count must be >= 1");
  if (spec.expert_count < 1) throw ConfigError("ModelSpec: expert_count must be >= 1");
  if (spec.kind == ModelKind::ple && spec.experts_per_task < 1)
    throw ConfigError("ModelSpec: experts_per_task must be >= 1 for ple");
}

Tensor init_weight(int fan_in, int fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  std::vector<double> w(static_cast<std::size_t>(fan_in) * fan_out);
  for (double& v : w) v = rng.uniform(-a, a);
  return Tensor::matrix(fan_in, fan_out, std::move(w));
}

// Builds the named parameter partition in canonical order; rng may be null
// for a zero-initialized skeleton (checkpoint loading).
ParamSet build_params(const ModelSpec& spec, Rng* rng) {
  auto weight = [&](int fi, int fo) {
    return rng ? init_weight(fi, fo, *rng) : Tensor::zeros({fi, fo});
  };
  auto bias = [&](int n) { return Tensor::zeros({n}); };

  ParamSet p;
  p.per_task.resize(static_cast<std::size_t>(spec.task_count));
  const int in = spec.input_dim, h = spec.hidden_dim;

  switch (spec.kind) {
    case ModelKind::shared_bottom:
      p.shared.push_back({"bottom.w", weight(in, h)});
      p.shared.push_back({"bottom.b", bias(h)});
      break;
    case ModelKind::mmoe:
      for (int k = 0; k < spec.expert_count; ++k) {
        p.shared.push_back({"expert" + std::to_string(k) + ".w", weight(in, h)});
        p.shared.push_back({"expert" + std::to_string(k) + ".b", bias(h)});
      }
      break;
    case ModelKind::ple:
      for (int k = 0; k < spec.expert_count; ++k) {
        p.shared.push_back({"shared_expert" + std::to_string(k) + ".w", weight(in, h)});
        p.shared.push_back({"shared_expert" + std::to_string(k) + ".b", bias(h)});
      }
      break;
  }

  for (int j = 0; j < spec.task_count; ++j) {
    auto& group = p.per_task[static_cast<std::size_t>(j)];
    const std::string tj = std::to_string(j);
    if (spec.kind == ModelKind::ple) {
      for (int l = 0; l < spec.experts_per_task; ++l) {
        const std::string el = "task" + tj + "_expert" + std::to_string(l);
        group.push_back({el + ".w", weight(in, h)});
        group.push_back({el + ".b", bias(h)});
      }
    }
    if (spec.kind != ModelKind::shared_bottom) {
      const int gates = spec.kind == ModelKind::ple
                            ? spec.expert_count + spec.experts_per_task
                            : spec.expert_count;
      group.push_back({"gate" + tj + ".w", weight(in, gates)});
      group.push_back({"gate" + tj + ".b", bias(gates)});
    }
    group.push_back({"tower" + tj + ".w", weight(h, 1)});
    group.push_back({"tower" + tj + ".b", bias(1)});
  }
  return p;
}

const Tensor& find_param(const std::vector<NamedTensor>& group, const std::string& name) {
  for (const auto& nt : group)
    if (nt.name == name) return nt.value;
  throw ContractError("model parameter missing: " + name);
}

}  // namespace

MultiTaskModel::MultiTaskModel(ModelSpec spec, std::uint64_t seed) : spec_(spec) {
  validate(spec_);
  Rng rng(seed);
  params_ = build_params(spec_, &rng);
}

MultiTaskModel build_model(const ModelSpec& spec, std::uint64_t seed) {
  return MultiTaskModel(spec, seed);
}

std::vector<Tensor> MultiTaskModel::run(Tape* tape, const Tensor& batch) const {
  (void)tape;  // parameters are already watched by forward_multi
  if (batch.rank() != 2 || batch.shape[1] != spec_.input_dim)
    throw DimensionError("forward: batch must be {B, input_dim}");

  std::vector<Tensor> logits;
  logits.reserve(static_cast<std::size_t>(spec_.task_count));

  if (spec_.kind == ModelKind::shared_bottom) {
    const Tensor h = relu(add(matmul(batch, find_param(params_.shared, "bottom.w")),
                              find_param(params_.shared, "bottom.b")));
    for (int j = 0; j < spec_.task_count; ++j) {
      const auto& group = params_.per_task[static_cast<std::size_t>(j)];
      const std::string tj = std::to_string(j);
      logits.push_back(add(matmul(h, find_param(group, "tower" + tj + ".w")),
                           find_param(group, "tower" + tj + ".b")));
    }
    return logits;
  }

  // expert outputs shared by all tasks (mmoe) or the shared block (ple)
  std::vector<Tensor> experts;
  const std::string prefix = spec_.kind == ModelKind::ple ? "shared_expert" : "expert";
  for (int k = 0; k < spec_.expert_count; ++k) {
    const std::string ek = prefix + std::to_string(k);
    experts.push_back(relu(add(matmul(batch, find_param(params_.shared, ek + ".w")),
                               find_param(params_.shared, ek + ".b"))));
  }

  for (int j = 0; j < spec_.task_count; ++j) {
    const auto& group = params_.per_task[static_cast<std::size_t>(j)];
    const std::string tj = std::to_string(j);

    std::vector<Tensor> pool = experts;
    if (spec_.kind == ModelKind::ple)
      for (int l = 0; l < spec_.experts_per_task; ++l) {
        const std::string el = "task" + tj + "_expert" + std::to_string(l);
        pool.push_back(relu(add(matmul(batch, find_param(group, el + ".w")),
                                find_param(group, el + ".b"))));
      }

    const Tensor gates = softmax(add(matmul(batch, find_param(group, "gate" + tj + ".w")),
                                     find_param(group, "gate" + tj + ".b")));
    Tensor mixed = mul(pool[0], slice(gates, 1, 0, 1));
    for (std::size_t k = 1; k < pool.size(); ++k)
      mixed = add(mixed, mul(pool[k], slice(gates, 1, static_cast<int>(k), 1)));

    logits.push_back(add(matmul(mixed, find_param(group, "tower" + tj + ".w")),
                         find_param(group, "tower" + tj + ".b")));
  }
  return logits;
}

std::vector<Tensor> MultiTaskModel::forward_multi(Tape& tape, const Tensor& batch) {
  params_.watch_all(tape);
  return run(&tape, batch);
}

std::vector<std::vector<double>> MultiTaskModel::predict_logits(const Tensor& batch) const {
  const std::vector<Tensor> logits = run(nullptr, batch);
  std::vector<std::vector<double>> out;
  out.reserve(logits.size());
  for (const Tensor& t : logits) out.push_back(t.data);
  return out;
}

namespace {

using nlohmann::json;

json group_to_json(const std::vector<NamedTensor>& group) {
  json arr = json::array();
  for (const auto& nt : group)
    arr.push_back({{"name", nt.name}, {"shape", nt.value.shape}, {"data", nt.value.data}});
  return arr;
}

void group_from_json(const json& arr, std::vector<NamedTensor>& group) {
  if (arr.size() != group.size()) throw ConfigError("checkpoint: parameter count mismatch");
  for (std::size_t i = 0; i < group.size(); ++i) {
    const json& e = arr[i];
    if (e.at("name").get<std::string>() != group[i].name)
      throw ConfigError("checkpoint: parameter order mismatch at " + group[i].name);
    const auto shape = e.at("shape").get<std::vector<int>>();
    if (shape != group[i].value.shape)
      throw ConfigError("checkpoint: shape mismatch at " + group[i].name);
    group[i].value.data = e.at("data").get<std::vector<double>>();
  }
}

}  // namespace

void MultiTaskModel::save_checkpoint(const std::string& path) const {
  json j;
  j["spec"] = {{"kind", to_string(spec_.kind)},
               {"input_dim", spec_.input_dim},
               {"expert_count", spec_.expert_count},
               {"experts_per_task", spec_.experts_per_task},
               {"hidden_dim", spec_.hidden_dim},
               {"task_count", spec_.task_count}};
  j["shared"] = group_to_json(params_.shared);
  json pt = json::array();
  for (const auto& group : params_.per_task) pt.push_back(group_to_json(group));
  j["per_task"] = pt;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write checkpoint: " + path);
  out << j.dump(2) << "\n";
}

MultiTaskModel MultiTaskModel::load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read checkpoint: " + path);
  json j;
  in >> j;
  const json& s = j.at("spec");
  ModelSpec spec;
  spec.kind = model_kind_from_string(s.at("kind").get<std::string>());
  spec.input_dim = s.at("input_dim").get<int>();
  spec.expert_count = s.at("expert_count").get<int>();
  spec.experts_per_task = s.at("experts_per_task").get<int>();
  spec.hidden_dim = s.at("hidden_dim").get<int>();
  spec.task_count = s.at("task_count").get<int>();
  validate(spec);

  MultiTaskModel model;
  model.spec_ = spec;
  model.params_ = build_params(spec, nullptr);
  group_from_json(j.at("shared"), model.params_.shared);
  const json& pt = j.at("per_task");
  if (pt.size() != model.params_.per_task.size())
    throw ConfigError("checkpoint: task count mismatch");
  for (std::size_t t = 0; t < pt.size(); ++t)
    group_from_json(pt[t], model.params_.per_task[t]);
  return model;
}

}  // namespace mtopt
