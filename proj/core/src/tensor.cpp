#include "mtopt/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "mtopt/errors.hpp"

namespace mtopt {

namespace {

std::int64_t shape_product(const std::vector<int>& shape) {
  std::int64_t p = 1;
  for (int d : shape) p *= d;
  return p;
}

std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Broadcast mode of b against a: 0 same shape, 1 row vector, 2 column
// vector, 3 scalar. Throws when shapes do not conform.
int broadcast_mode(const Tensor& a, const Tensor& b, const char* who) {
  if (a.shape == b.shape) return 0;
  if (b.size() == 1) return 3;
  const int m = a.rows(), n = a.cols();
  if (a.rank() == 2) {
    if ((b.rank() == 1 && b.shape[0] == n) ||
        (b.rank() == 2 && b.shape[0] == 1 && b.shape[1] == n))
      return 1;
    if (b.rank() == 2 && b.shape[0] == m && b.shape[1] == 1) return 2;
  }
  throw DimensionError(std::string(who) + ": shapes do not conform " +
                       shape_str(a.shape) + " vs " + shape_str(b.shape));
}

}  // namespace

Tensor::Tensor(std::vector<int> shape_in, std::vector<double> data_in)
    : shape(std::move(shape_in)), data(std::move(data_in)) {
  if (shape.empty() || shape.size() > 2)
    throw DimensionError("Tensor: rank must be 1 or 2, got " + shape_str(shape));
  for (int d : shape)
    if (d <= 0) throw DimensionError("Tensor: nonpositive dimension in " + shape_str(shape));
  if (shape_product(shape) != static_cast<std::int64_t>(data.size()))
    throw DimensionError("Tensor: shape " + shape_str(shape) + " does not match data length " +
                         std::to_string(data.size()));
}

Tensor Tensor::zeros(std::vector<int> shape) {
  std::vector<double> d(static_cast<std::size_t>(shape_product(shape)), 0.0);
  return Tensor(std::move(shape), std::move(d));
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::row(std::vector<double> v) {
  const int n = static_cast<int>(v.size());
  return Tensor({n}, std::move(v));
}

Tensor Tensor::matrix(int r, int c, std::vector<double> v) {
  return Tensor({r, c}, std::move(v));
}

double Tensor::value() const {
  if (size() != 1) throw ContractError("Tensor::value: tensor is not scalar");
  return data[0];
}

double& Tensor::at(int r, int c) {
  return data[static_cast<std::size_t>(r) * cols() + c];
}

double Tensor::at(int r, int c) const {
  return data[static_cast<std::size_t>(r) * cols() + c];
}

Tape::~Tape() {
  for (auto& [node, t] : watched_)
    if (t->tape == this) {
      t->tape = nullptr;
      t->node = -1;
    }
}

void Tape::watch(Tensor& t) {
  if (t.tape == this && t.node >= 0) return;
  const int id = record(OpKind::leaf, t.shape, t.data, {});
  t.tape = this;
  t.node = id;
  watched_.emplace_back(id, &t);
}

int Tape::record(OpKind kind, std::vector<int> shape, std::vector<double> value,
                 std::vector<int> inputs, std::vector<int> iattrs) {
  nodes_.push_back(Node{kind, std::move(shape), std::move(value), std::move(inputs),
                        std::move(iattrs)});
  return static_cast<int>(nodes_.size()) - 1;
}

namespace {

// Resolves the operand's node on `tape`, recording untracked operands as
// constants. Mixing live tapes is an error.
int operand_node(Tape& tape, const Tensor& t) {
  if (t.tracked()) {
    if (t.tape != &tape)
      throw ContractError("op: operands tracked on different tapes");
    return t.node;
  }
  return tape.record(OpKind::constant, t.shape, t.data, {});
}

Tape* common_tape(std::initializer_list<const Tensor*> ts) {
  Tape* tape = nullptr;
  for (const Tensor* t : ts)
    if (t->tracked()) {
      if (tape != nullptr && tape != t->tape)
        throw ContractError("op: operands tracked on different tapes");
      tape = t->tape;
    }
  return tape;
}

Tensor make_result(Tape* tape, OpKind kind, std::vector<int> shape,
                   std::vector<double> value, std::initializer_list<const Tensor*> ins,
                   std::vector<int> iattrs = {}) {
  Tensor out(std::move(shape), std::move(value));
  if (tape != nullptr) {
    std::vector<int> ids;
    ids.reserve(ins.size());
    for (const Tensor* t : ins) ids.push_back(operand_node(*tape, *t));
    out.node = tape->record(kind, out.shape, out.data, std::move(ids), std::move(iattrs));
    out.tape = tape;
  }
  return out;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[0])
    throw DimensionError("matmul: shapes do not conform " + shape_str(a.shape) + " vs " +
                         shape_str(b.shape));
  const int m = a.shape[0], k = a.shape[1], n = b.shape[1];
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p) {
      const double av = a.data[static_cast<std::size_t>(i) * k + p];
      if (av == 0.0) continue;
      const double* brow = &b.data[static_cast<std::size_t>(p) * n];
      double* orow = &out[static_cast<std::size_t>(i) * n];
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  return make_result(common_tape({&a, &b}), OpKind::matmul, {m, n}, std::move(out),
                     {&a, &b});
}

namespace {

double broadcast_read(const std::vector<double>& b, int mode, int r, int c, int ncols) {
  switch (mode) {
    case 0: return b[static_cast<std::size_t>(r) * ncols + c];
    case 1: return b[static_cast<std::size_t>(c)];
    case 2: return b[static_cast<std::size_t>(r)];
    default: return b[0];
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  const int mode = broadcast_mode(a, b, "add");
  const int m = a.rows(), n = a.cols();
  std::vector<double> out(a.data.size());
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < n; ++c)
      out[static_cast<std::size_t>(r) * n + c] =
          a.data[static_cast<std::size_t>(r) * n + c] + broadcast_read(b.data, mode, r, c, n);
  return make_result(common_tape({&a, &b}), OpKind::add, a.shape, std::move(out), {&a, &b},
                     {mode});
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const int mode = broadcast_mode(a, b, "mul");
  const int m = a.rows(), n = a.cols();
  std::vector<double> out(a.data.size());
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < n; ++c)
      out[static_cast<std::size_t>(r) * n + c] =
          a.data[static_cast<std::size_t>(r) * n + c] * broadcast_read(b.data, mode, r, c, n);
  return make_result(common_tape({&a, &b}), OpKind::mul, a.shape, std::move(out), {&a, &b},
                     {mode});
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.data.size());
  for (std::size_t i = 0; i < a.data.size(); ++i) out[i] = a.data[i] > 0.0 ? a.data[i] : 0.0;
  return make_result(common_tape({&a}), OpKind::relu, a.shape, std::move(out), {&a});
}

Tensor sigmoid(const Tensor& a) {
  std::vector<double> out(a.data.size());
  for (std::size_t i = 0; i < a.data.size(); ++i) out[i] = stable_sigmoid(a.data[i]);
  return make_result(common_tape({&a}), OpKind::sigmoid, a.shape, std::move(out), {&a});
}

Tensor softmax(const Tensor& a) {
  const int rows = a.rank() == 2 ? a.shape[0] : 1;
  const int n = a.rank() == 2 ? a.shape[1] : a.shape[0];
  std::vector<double> out(a.data.size());
  for (int r = 0; r < rows; ++r) {
    const double* in = &a.data[static_cast<std::size_t>(r) * n];
    double* o = &out[static_cast<std::size_t>(r) * n];
    double mx = in[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, in[j]);
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      o[j] = std::exp(in[j] - mx);
      sum += o[j];
    }
    for (int j = 0; j < n; ++j) o[j] /= sum;
  }
  return make_result(common_tape({&a}), OpKind::softmax, a.shape, std::move(out), {&a});
}

Tensor mean(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data) s += v;
  return make_result(common_tape({&a}), OpKind::mean, {1},
                     {s / static_cast<double>(a.data.size())}, {&a});
}

Tensor bce_with_logits(const Tensor& logits, const Tensor& labels) {
  if (logits.shape != labels.shape)
    throw DimensionError("bce_with_logits: shapes differ " + shape_str(logits.shape) +
                         " vs " + shape_str(labels.shape));
  double s = 0.0;
  for (std::size_t i = 0; i < logits.data.size(); ++i) {
    const double z = logits.data[i], y = labels.data[i];
    s += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  return make_result(common_tape({&logits, &labels}), OpKind::bce_with_logits, {1},
                     {s / static_cast<double>(logits.data.size())}, {&logits, &labels});
}

Tensor mse(const Tensor& pred, const Tensor& target) {
  if (pred.shape != target.shape)
    throw DimensionError("mse: shapes differ " + shape_str(pred.shape) + " vs " +
                         shape_str(target.shape));
  double s = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double d = pred.data[i] - target.data[i];
    s += d * d;
  }
  return make_result(common_tape({&pred, &target}), OpKind::mse, {1},
                     {s / static_cast<double>(pred.data.size())}, {&pred, &target});
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  const int rank = parts.front().rank();
  if (axis < 0 || axis >= rank) throw DimensionError("concat: bad axis");
  for (const Tensor& p : parts)
    if (p.rank() != rank) throw DimensionError("concat: mixed ranks");

  std::vector<int> shape = parts.front().shape;
  std::vector<double> out;
  if (rank == 1 || axis == 0) {
    int total = 0;
    for (const Tensor& p : parts) {
      if (rank == 2 && p.shape[1] != shape[1])
        throw DimensionError("concat: column mismatch");
      total += p.shape[0];
      out.insert(out.end(), p.data.begin(), p.data.end());
    }
    shape[0] = total;
  } else {
    const int m = shape[0];
    int total = 0;
    for (const Tensor& p : parts) {
      if (p.shape[0] != m) throw DimensionError("concat: row mismatch");
      total += p.shape[1];
    }
    out.resize(static_cast<std::size_t>(m) * total);
    int off = 0;
    for (const Tensor& p : parts) {
      const int w = p.shape[1];
      for (int r = 0; r < m; ++r)
        std::copy_n(&p.data[static_cast<std::size_t>(r) * w], w,
                    &out[static_cast<std::size_t>(r) * total + off]);
      off += w;
    }
    shape[1] = total;
  }

  Tape* tape = nullptr;
  for (const Tensor& p : parts)
    if (p.tracked()) {
      if (tape != nullptr && tape != p.tape)
        throw ContractError("concat: operands tracked on different tapes");
      tape = p.tape;
    }
  Tensor result(std::move(shape), std::move(out));
  if (tape != nullptr) {
    std::vector<int> ids;
    ids.reserve(parts.size());
    for (const Tensor& p : parts) ids.push_back(operand_node(*tape, p));
    result.node = tape->record(OpKind::concat, result.shape, result.data, std::move(ids),
                               {axis});
    result.tape = tape;
  }
  return result;
}

Tensor slice(const Tensor& a, int axis, int start, int len) {
  if (axis < 0 || axis >= a.rank()) throw DimensionError("slice: bad axis");
  const int extent = a.shape[axis];
  if (start < 0 || len <= 0 || start + len > extent)
    throw DimensionError("slice: range [" + std::to_string(start) + "," +
                         std::to_string(start + len) + ") outside extent " +
                         std::to_string(extent));
  std::vector<int> shape = a.shape;
  shape[axis] = len;
  std::vector<double> out;
  if (a.rank() == 1 || axis == 0) {
    const int w = a.cols();
    out.assign(a.data.begin() + static_cast<std::size_t>(start) * w,
               a.data.begin() + static_cast<std::size_t>(start + len) * w);
  } else {
    const int m = a.shape[0], w = a.shape[1];
    out.resize(static_cast<std::size_t>(m) * len);
    for (int r = 0; r < m; ++r)
      std::copy_n(&a.data[static_cast<std::size_t>(r) * w + start], len,
                  &out[static_cast<std::size_t>(r) * len]);
  }
  return make_result(common_tape({&a}), OpKind::slice, std::move(shape), std::move(out),
                     {&a}, {axis, start, len});
}

Tensor op_forward(OpKind kind, const std::vector<const Tensor*>& inputs,
                  const std::vector<int>& iattrs) {
  auto need = [&](std::size_t n) {
    if (inputs.size() != n) throw ContractError("op_forward: wrong operand count");
  };
  switch (kind) {
    case OpKind::matmul: need(2); return matmul(*inputs[0], *inputs[1]);
    case OpKind::add: need(2); return add(*inputs[0], *inputs[1]);
    case OpKind::mul: need(2); return mul(*inputs[0], *inputs[1]);
    case OpKind::relu: need(1); return relu(*inputs[0]);
    case OpKind::sigmoid: need(1); return sigmoid(*inputs[0]);
    case OpKind::softmax: need(1); return softmax(*inputs[0]);
    case OpKind::mean: need(1); return mean(*inputs[0]);
    case OpKind::bce_with_logits: need(2); return bce_with_logits(*inputs[0], *inputs[1]);
    case OpKind::mse: need(2); return mse(*inputs[0], *inputs[1]);
    case OpKind::concat: {
      std::vector<Tensor> parts;
      parts.reserve(inputs.size());
      for (const Tensor* t : inputs) parts.push_back(*t);
      return concat(parts, iattrs.empty() ? 0 : iattrs[0]);
    }
    case OpKind::slice:
      need(1);
      if (iattrs.size() != 3) throw ContractError("op_forward: slice needs axis/start/len");
      return slice(*inputs[0], iattrs[0], iattrs[1], iattrs[2]);
    default:
      throw ContractError("op_forward: not a forward op");
  }
}

std::unordered_map<int, std::vector<double>> Tape::backward(const Tensor& loss) {
  if (loss.tape != this || loss.node < 0)
    throw ContractError("backward: loss is not recorded on this tape");
  if (loss.size() != 1) throw ContractError("backward: loss must be scalar");
  if (nodes_.empty()) throw ContractError("backward: empty tape");

  std::vector<std::vector<double>> gbuf(nodes_.size());
  auto gref = [&](int id) -> std::vector<double>& {
    auto& g = gbuf[static_cast<std::size_t>(id)];
    if (g.empty()) g.assign(nodes_[static_cast<std::size_t>(id)].value.size(), 0.0);
    return g;
  };
  gref(loss.node)[0] = 1.0;

  for (int id = loss.node; id >= 0; --id) {
    const Node& nd = nodes_[static_cast<std::size_t>(id)];
    const auto& g = gbuf[static_cast<std::size_t>(id)];
    if (g.empty()) continue;
    switch (nd.kind) {
      case OpKind::leaf:
      case OpKind::constant:
        break;
      case OpKind::matmul: {
        const Node& na = nodes_[nd.inputs[0]];
        const Node& nb = nodes_[nd.inputs[1]];
        const int m = na.shape[0], k = na.shape[1], n = nb.shape[1];
        auto& ga = gref(nd.inputs[0]);
        auto& gb2 = gref(nd.inputs[1]);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) {
            const double gv = g[static_cast<std::size_t>(i) * n + j];
            if (gv == 0.0) continue;
            for (int p = 0; p < k; ++p) {
              ga[static_cast<std::size_t>(i) * k + p] +=
                  gv * nb.value[static_cast<std::size_t>(p) * n + j];
              gb2[static_cast<std::size_t>(p) * n + j] +=
                  gv * na.value[static_cast<std::size_t>(i) * k + p];
            }
          }
        break;
      }
      case OpKind::add: {
        const int mode = nd.iattrs[0];
        const int m = nd.shape[0], n = nd.shape.size() == 2 ? nd.shape[1] : 1;
        auto& ga = gref(nd.inputs[0]);
        auto& gb2 = gref(nd.inputs[1]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        for (int r = 0; r < m; ++r)
          for (int c = 0; c < n; ++c) {
            const double gv = g[static_cast<std::size_t>(r) * n + c];
            switch (mode) {
              case 0: gb2[static_cast<std::size_t>(r) * n + c] += gv; break;
              case 1: gb2[static_cast<std::size_t>(c)] += gv; break;
              case 2: gb2[static_cast<std::size_t>(r)] += gv; break;
              default: gb2[0] += gv; break;
            }
          }
        break;
      }
      case OpKind::mul: {
        const int mode = nd.iattrs[0];
        const Node& na = nodes_[nd.inputs[0]];
        const Node& nb = nodes_[nd.inputs[1]];
        const int m = nd.shape[0], n = nd.shape.size() == 2 ? nd.shape[1] : 1;
        auto& ga = gref(nd.inputs[0]);
        auto& gb2 = gref(nd.inputs[1]);
        for (int r = 0; r < m; ++r)
          for (int c = 0; c < n; ++c) {
            const std::size_t idx = static_cast<std::size_t>(r) * n + c;
            const double gv = g[idx];
            const double bv = broadcast_read(nb.value, mode, r, c, n);
            ga[idx] += gv * bv;
            const double contrib = gv * na.value[idx];
            switch (mode) {
              case 0: gb2[idx] += contrib; break;
              case 1: gb2[static_cast<std::size_t>(c)] += contrib; break;
              case 2: gb2[static_cast<std::size_t>(r)] += contrib; break;
              default: gb2[0] += contrib; break;
            }
          }
        break;
      }
      case OpKind::relu: {
        const Node& na = nodes_[nd.inputs[0]];
        auto& ga = gref(nd.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i)
          if (na.value[i] > 0.0) ga[i] += g[i];
        break;
      }
      case OpKind::sigmoid: {
        auto& ga = gref(nd.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double s = nd.value[i];
          ga[i] += g[i] * s * (1.0 - s);
        }
        break;
      }
      case OpKind::softmax: {
        auto& ga = gref(nd.inputs[0]);
        const int rows = nd.shape.size() == 2 ? nd.shape[0] : 1;
        const int n = nd.shape.size() == 2 ? nd.shape[1] : nd.shape[0];
        for (int r = 0; r < rows; ++r) {
          const double* s = &nd.value[static_cast<std::size_t>(r) * n];
          const double* gr = &g[static_cast<std::size_t>(r) * n];
          double dotv = 0.0;
          for (int j = 0; j < n; ++j) dotv += gr[j] * s[j];
          for (int j = 0; j < n; ++j)
            ga[static_cast<std::size_t>(r) * n + j] += s[j] * (gr[j] - dotv);
        }
        break;
      }
      case OpKind::mean: {
        auto& ga = gref(nd.inputs[0]);
        const double gv = g[0] / static_cast<double>(ga.size());
        for (double& v : ga) v += gv;
        break;
      }
      case OpKind::bce_with_logits: {
        const Node& nz = nodes_[nd.inputs[0]];
        const Node& ny = nodes_[nd.inputs[1]];
        auto& gz = gref(nd.inputs[0]);
        auto& gy = gref(nd.inputs[1]);
        const double gv = g[0] / static_cast<double>(nz.value.size());
        for (std::size_t i = 0; i < nz.value.size(); ++i) {
          gz[i] += gv * (stable_sigmoid(nz.value[i]) - ny.value[i]);
          gy[i] += gv * (-nz.value[i]);
        }
        break;
      }
      case OpKind::mse: {
        const Node& np = nodes_[nd.inputs[0]];
        const Node& nt = nodes_[nd.inputs[1]];
        auto& gp = gref(nd.inputs[0]);
        auto& gt = gref(nd.inputs[1]);
        const double gv = g[0] / static_cast<double>(np.value.size());
        for (std::size_t i = 0; i < np.value.size(); ++i) {
          const double d = 2.0 * (np.value[i] - nt.value[i]);
          gp[i] += gv * d;
          gt[i] -= gv * d;
        }
        break;
      }
      case OpKind::concat: {
        const int axis = nd.iattrs[0];
        if (nd.shape.size() == 1 || axis == 0) {
          std::size_t off = 0;
          for (int in : nd.inputs) {
            auto& gi = gref(in);
            for (std::size_t t = 0; t < gi.size(); ++t) gi[t] += g[off + t];
            off += gi.size();
          }
        } else {
          const int m = nd.shape[0], total = nd.shape[1];
          int off = 0;
          for (int in : nd.inputs) {
            const Node& ni = nodes_[in];
            const int w = ni.shape[1];
            auto& gi = gref(in);
            for (int r = 0; r < m; ++r)
              for (int c = 0; c < w; ++c)
                gi[static_cast<std::size_t>(r) * w + c] +=
                    g[static_cast<std::size_t>(r) * total + off + c];
            off += w;
          }
        }
        break;
      }
      case OpKind::slice: {
        const int axis = nd.iattrs[0], start = nd.iattrs[1], len = nd.iattrs[2];
        const Node& na = nodes_[nd.inputs[0]];
        auto& ga = gref(nd.inputs[0]);
        if (na.shape.size() == 1 || axis == 0) {
          const int w = na.shape.size() == 2 ? na.shape[1] : 1;
          for (std::size_t i = 0; i < g.size(); ++i)
            ga[static_cast<std::size_t>(start) * w + i] += g[i];
        } else {
          const int m = na.shape[0], w = na.shape[1];
          for (int r = 0; r < m; ++r)
            for (int c = 0; c < len; ++c)
              ga[static_cast<std::size_t>(r) * w + start + c] +=
                  g[static_cast<std::size_t>(r) * len + c];
        }
        break;
      }
    }
  }

  std::unordered_map<int, std::vector<double>> out;
  for (auto& [node, t] : watched_) {
    auto& g = gbuf[static_cast<std::size_t>(node)];
    if (g.empty()) g.assign(nodes_[static_cast<std::size_t>(node)].value.size(), 0.0);
    t->grad = g;
    out.emplace(node, std::move(g));
  }
  return out;
}

std::unordered_map<const Tensor*, std::vector<double>> finite_diff_grad(
    const std::function<double()>& f, const std::vector<Tensor*>& params, double h) {
  if (h <= 0.0) throw ContractError("finite_diff_grad: h must be > 0");
  std::unordered_map<const Tensor*, std::vector<double>> out;
  for (Tensor* p : params) {
    std::vector<double> g(p->data.size(), 0.0);
    for (std::size_t i = 0; i < p->data.size(); ++i) {
      const double saved = p->data[i];
      p->data[i] = saved + h;
      const double fp = f();
      p->data[i] = saved - h;
      const double fm = f();
      p->data[i] = saved;
      g[i] = (fp - fm) / (2.0 * h);
    }
    out.emplace(p, std::move(g));
  }
  return out;
}

}  // namespace mtopt
