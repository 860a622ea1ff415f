#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace mtopt {

class Tape;

// Dense tensor of 64-bit floats, rank 1 or 2. `grad` stays empty until a
// backward pass fills it; `tape`/`node` link the tensor into the graph while
// it is watched.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;
  std::vector<double> grad;
  Tape* tape = nullptr;
  int node = -1;

  Tensor() = default;
  Tensor(std::vector<int> shape_in, std::vector<double> data_in);

  static Tensor zeros(std::vector<int> shape);
  static Tensor scalar(double v);
  static Tensor row(std::vector<double> v);
  static Tensor matrix(int r, int c, std::vector<double> v);

  std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int rows() const { return shape.empty() ? 1 : shape[0]; }
  int cols() const { return rank() == 2 ? shape[1] : 1; }
  bool tracked() const { return tape != nullptr && node >= 0; }
  double value() const;  // scalar accessor
  double& at(int r, int c);
  double at(int r, int c) const;
};

enum class OpKind : std::uint8_t {
  leaf,
  constant,
  matmul,
  add,
  mul,
  relu,
  sigmoid,
  softmax,
  mean,
  bce_with_logits,
  mse,
  concat,
  slice,
};

// Reverse-mode tape. Nodes are appended in execution order, which is a
// topological order by construction; backward walks them once in reverse.
// The tape is rebuilt per forward pass. Watched tensors must outlive the
// tape; the destructor detaches them.
class Tape {
 public:
  Tape() = default;
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Registers t as a variable leaf. Idempotent for a tensor already watched
  // on this tape; re-watching a tensor owned by another tape moves it here.
  void watch(Tensor& t);

  // Computes d loss / d param for every watched tensor, writing into each
  // tensor's grad and returning the map keyed by node id. Each call is
  // independent: gradients are recomputed from scratch, never accumulated
  // across calls.
  std::unordered_map<int, std::vector<double>> backward(const Tensor& loss);

  std::size_t node_count() const { return nodes_.size(); }

  struct Node {
    OpKind kind;
    std::vector<int> shape;
    std::vector<double> value;
    std::vector<int> inputs;
    std::vector<int> iattrs;  // op-specific: broadcast mode / axis / start / len
  };

  int record(OpKind kind, std::vector<int> shape, std::vector<double> value,
             std::vector<int> inputs, std::vector<int> iattrs = {});
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }

 private:
  std::vector<Node> nodes_;
  std::vector<std::pair<int, Tensor*>> watched_;
};

Tensor matmul(const Tensor& a, const Tensor& b);
// add/mul broadcast b over a: same shape, row vector {n}/{1,n}, column
// {m,1}, or scalar {1}.
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softmax(const Tensor& a);  // over the last axis
Tensor mean(const Tensor& a);     // scalar mean over all elements
Tensor bce_with_logits(const Tensor& logits, const Tensor& labels);  // scalar
Tensor mse(const Tensor& pred, const Tensor& target);                // scalar
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& a, int axis, int start, int len);

// Generic dispatcher over the op set above.
Tensor op_forward(OpKind kind, const std::vector<const Tensor*>& inputs,
                  const std::vector<int>& iattrs = {});

// Central-difference gradient oracle: perturbs each coordinate of each param
// in place and evaluates f twice. f must be a pure function of params.
std::unordered_map<const Tensor*, std::vector<double>> finite_diff_grad(
    const std::function<double()>& f, const std::vector<Tensor*>& params, double h);

}  // namespace mtopt
