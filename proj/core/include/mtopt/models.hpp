#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mtopt/tensor.hpp"

namespace mtopt {

enum class ModelKind { shared_bottom, mmoe, ple };

std::string to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);

struct ModelSpec {
  ModelKind kind = ModelKind::mmoe;
  int input_dim = 16;
  int expert_count = 4;
  int experts_per_task = 2;  // ple only
  int hidden_dim = 16;
  int task_count = 2;
};

struct NamedTensor {
  std::string name;
  Tensor value;
};

// Partition of all trainable tensors into the shared group and one group per
// task. Every tensor lives in exactly one group.
struct ParamSet {
  std::vector<NamedTensor> shared;
  std::vector<std::vector<NamedTensor>> per_task;

  int task_count() const { return static_cast<int>(per_task.size()); }
  std::int64_t shared_dim() const;
  std::int64_t task_dim(int task) const;

  void watch_all(Tape& tape);
  std::vector<double> shared_values() const;
  std::vector<double> shared_grads() const;  // zeros where a grad is absent
  void add_to_shared(std::span<const double> delta);
  std::vector<double> task_values(int task) const;
  std::vector<double> task_grads(int task) const;
  void add_to_task(int task, std::span<const double> delta);
};

// Multi-task ranking model over the tensor ops. One forward pass of the
// shared layers serves all task heads.
class MultiTaskModel {
 public:
  MultiTaskModel(ModelSpec spec, std::uint64_t seed);

  const ModelSpec& spec() const { return spec_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  // Tracked forward: watches every parameter on the tape and returns one
  // logits tensor of shape {batch, 1} per task.
  std::vector<Tensor> forward_multi(Tape& tape, const Tensor& batch);

  // Untracked forward for evaluation; safe to call concurrently once no tape
  // is watching the parameters.
  std::vector<std::vector<double>> predict_logits(const Tensor& batch) const;

  void save_checkpoint(const std::string& path) const;
  static MultiTaskModel load_checkpoint(const std::string& path);

 private:
  MultiTaskModel() = default;
  std::vector<Tensor> run(Tape* tape, const Tensor& batch) const;

  ModelSpec spec_;
  ParamSet params_;
};

MultiTaskModel build_model(const ModelSpec& spec, std::uint64_t seed);

}  // namespace mtopt
