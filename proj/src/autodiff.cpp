#include "got/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "got/errors.hpp"

namespace got {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMat = Eigen::Map<const RowMajor>;

ConstMat as_matrix(const Tensor& t) {
  return ConstMat(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                  static_cast<Eigen::Index>(t.cols()));
}

// Eigen picks its vectorization peeling from the data address, so products
// over std::vector storage can sum in a different order from run to run.
// Owned Eigen matrices are always aligned, which keeps results bitwise stable.
RowMajor owned(const double* data, Eigen::Index r, Eigen::Index c) {
  return ConstMat(data, r, c);
}

RowMajor owned(const Tensor& t) { return as_matrix(t); }

void add_into(double* dst, const RowMajor& m) {
  const double* src = m.data();
  for (Eigen::Index k = 0; k < m.size(); ++k) dst[k] += src[k];
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected rank-2 tensor, got " +
                         shape_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

}  // namespace

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Constant: return "constant";
    case OpKind::Linear: return "linear";
    case OpKind::Relu: return "relu";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Scale: return "scale";
    case OpKind::Square: return "square";
    case OpKind::Sum: return "sum";
    case OpKind::Mean: return "mean";
    case OpKind::WeightedSum: return "weighted_sum";
    case OpKind::PairwiseDistance: return "pairwise_euclidean";
    case OpKind::PairwiseSqDistance: return "pairwise_sq_euclidean";
    case OpKind::ConcatCols: return "concat_cols";
    case OpKind::GatherRows: return "gather_rows";
  }
  return "?";
}

const Tensor& Var::value() const { return graph_->value(*this); }

Var Graph::constant(Tensor value) {
  Node n;
  n.kind = OpKind::Constant;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::leaf(Tensor& tensor) {
  Node n;
  n.kind = OpKind::Leaf;
  n.external = &tensor;
  n.sink = tensor.requires_grad() ? &tensor : nullptr;
  n.needs_grad = n.sink != nullptr;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::frozen(const Tensor& tensor) {
  Node n;
  n.kind = OpKind::Constant;
  n.external = &tensor;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Graph::value(const Var& v) const {
  check_owned(v);
  return node_value(nodes_[v.id()]);
}

void Graph::check_owned(const Var& v) const {
  if (v.graph_ != this || v.id() >= nodes_.size()) {
    throw PreconditionError("variable does not belong to this graph");
  }
}

Var Graph::record(OpKind kind, std::initializer_list<Var> inputs, Tensor value,
                  Saved saved) {
  Node n;
  n.kind = kind;
  for (const Var& in : inputs) {
    check_owned(in);
    n.inputs.push_back(in.id());
    n.needs_grad = n.needs_grad || nodes_[in.id()].needs_grad;
  }
  if (finite_checks_ && !value.all_finite()) {
    throw NumericalError(std::string("non-finite output from ") + op_name(kind));
  }
  n.value = std::move(value);
  n.saved = std::move(saved);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Graph::backward(const Var& loss) {
  check_owned(loss);
  const Tensor& out = value(loss);
  if (out.size() != 1) {
    throw PreconditionError("backward() needs a scalar loss, got shape " +
                            shape_string(out.shape()));
  }
  last_visits_ = 0;
  if (!nodes_[loss.id()].needs_grad) return;

  std::vector<std::vector<double>> adj(loss.id() + 1);
  adj[loss.id()].assign(1, 1.0);
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    if (adj[id].empty()) continue;
    ++last_visits_;
    if (finite_checks_) {
      for (double g : adj[id]) {
        if (!std::isfinite(g)) {
          throw NumericalError(std::string("non-finite gradient at ") +
                               op_name(nodes_[id].kind));
        }
      }
    }
    propagate(id, adj[id], adj);
    if (id != loss.id()) std::vector<double>().swap(adj[id]);
  }
}

void Graph::propagate(std::size_t id, std::span<const double> g,
                      std::vector<std::vector<double>>& adj) {
  Node& n = nodes_[id];

  auto grad_of = [&](std::size_t slot) -> double* {
    const std::size_t in = n.inputs[slot];
    if (!nodes_[in].needs_grad) return nullptr;
    auto& a = adj[in];
    if (a.empty()) a.assign(node_value(nodes_[in]).size(), 0.0);
    return a.data();
  };

  switch (n.kind) {
    case OpKind::Leaf: {
      auto dst = n.sink->grad();
      for (std::size_t k = 0; k < g.size(); ++k) dst[k] += g[k];
      break;
    }
    case OpKind::Constant:
      break;
    case OpKind::Linear: {
      const Tensor& x = node_value(nodes_[n.inputs[0]]);
      const Tensor& W = node_value(nodes_[n.inputs[1]]);
      const auto B = static_cast<Eigen::Index>(x.rows());
      const auto O = static_cast<Eigen::Index>(W.cols());
      const RowMajor G = owned(g.data(), B, O);
      if (double* dx = grad_of(0)) {
        const RowMajor d = G * owned(W).transpose();
        add_into(dx, d);
      }
      if (double* dW = grad_of(1)) {
        const RowMajor d = owned(x).transpose() * G;
        add_into(dW, d);
      }
      if (double* db = grad_of(2)) {
        for (Eigen::Index r = 0; r < B; ++r) {
          for (Eigen::Index c = 0; c < O; ++c) db[c] += G(r, c);
        }
      }

      break;
    }
    case OpKind::Relu: {
      if (double* dx = grad_of(0)) {
        const auto& x = node_value(nodes_[n.inputs[0]]).buffer();
        for (std::size_t k = 0; k < g.size(); ++k) {
          if (x[k] > 0.0) dx[k] += g[k];
        }
      }
      break;
    }
    case OpKind::Add:
    case OpKind::Sub: {
      const double sign = n.kind == OpKind::Add ? 1.0 : -1.0;
      if (double* da = grad_of(0)) {
        for (std::size_t k = 0; k < g.size(); ++k) da[k] += g[k];
      }
      if (double* db = grad_of(1)) {
        for (std::size_t k = 0; k < g.size(); ++k) db[k] += sign * g[k];
      }
      break;
    }
    case OpKind::Scale: {
      if (double* dx = grad_of(0)) {
        for (std::size_t k = 0; k < g.size(); ++k) dx[k] += n.saved.scalar * g[k];
      }
      break;
    }
    case OpKind::Square: {
      if (double* dx = grad_of(0)) {
        const auto& x = node_value(nodes_[n.inputs[0]]).buffer();
        for (std::size_t k = 0; k < g.size(); ++k) dx[k] += 2.0 * x[k] * g[k];
      }
      break;
    }
    case OpKind::Sum:
    case OpKind::Mean: {
      if (double* dx = grad_of(0)) {
        const std::size_t N = node_value(nodes_[n.inputs[0]]).size();
        const double d = n.kind == OpKind::Sum ? g[0] : g[0] / static_cast<double>(N);
        for (std::size_t k = 0; k < N; ++k) dx[k] += d;
      }
      break;
    }
    case OpKind::WeightedSum: {
      if (double* dx = grad_of(0)) {
        const auto& w = n.saved.weights;
        for (std::size_t k = 0; k < w.size(); ++k) dx[k] += g[0] * w[k];
      }
      break;
    }
    case OpKind::PairwiseDistance:
    case OpKind::PairwiseSqDistance: {
      const Tensor& A = node_value(nodes_[n.inputs[0]]);
      const Tensor& B = node_value(nodes_[n.inputs[1]]);
      const std::size_t N = A.rows(), M = B.rows(), D = A.cols();
      const auto& out = n.value.buffer();
      double* dA = grad_of(0);
      double* dB = grad_of(1);
      const bool sq = n.kind == OpKind::PairwiseSqDistance;
      for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t j = 0; j < M; ++j) {
          const double gij = g[i * M + j];
          if (gij == 0.0) continue;
          const double c = sq ? 2.0 * gij : gij / out[i * M + j];
          for (std::size_t d = 0; d < D; ++d) {
            const double diff = c * (A.at(i, d) - B.at(j, d));
            if (dA) dA[i * D + d] += diff;
            if (dB) dB[j * D + d] -= diff;
          }
        }
      }
      break;
    }
    case OpKind::ConcatCols: {
      const Tensor& a = node_value(nodes_[n.inputs[0]]);
      const Tensor& b = node_value(nodes_[n.inputs[1]]);
      const std::size_t R = a.rows(), ca = a.cols(), cb = b.cols(), C = ca + cb;
      double* da = grad_of(0);
      double* db = grad_of(1);
      for (std::size_t r = 0; r < R; ++r) {
        if (da) for (std::size_t c = 0; c < ca; ++c) da[r * ca + c] += g[r * C + c];
        if (db) for (std::size_t c = 0; c < cb; ++c) db[r * cb + c] += g[r * C + ca + c];
      }
      break;
    }
    case OpKind::GatherRows: {
      if (double* dx = grad_of(0)) {
        const std::size_t C = n.value.cols();
        const auto& rows = n.saved.index;
        for (std::size_t k = 0; k < rows.size(); ++k) {
          for (std::size_t c = 0; c < C; ++c) dx[rows[k] * C + c] += g[k * C + c];
        }
      }
      break;
    }
  }
}

Var linear(Var x, Var W, Var b) {
  const Tensor& xv = x.value();
  const Tensor& Wv = W.value();
  const Tensor& bv = b.value();
  require_matrix(xv, "linear");
  require_matrix(Wv, "linear");
  if (xv.cols() != Wv.rows() || bv.size() != Wv.cols()) {
    throw DimensionError("linear: x " + shape_string(xv.shape()) + ", W " +
                         shape_string(Wv.shape()) + ", b " + shape_string(bv.shape()));
  }
  const auto B = static_cast<Eigen::Index>(xv.rows());
  const auto O = static_cast<Eigen::Index>(Wv.cols());
  Tensor out(Shape{xv.rows(), Wv.cols()});
  const RowMajor prod = owned(xv) * owned(Wv);
  double* o = out.data().data();
  const double* bias = bv.data().data();
  for (Eigen::Index r = 0; r < B; ++r) {
    for (Eigen::Index c = 0; c < O; ++c) o[r * O + c] = prod(r, c) + bias[c];
  }
  return x.graph().record(OpKind::Linear, {x, W, b}, std::move(out));
}

Var relu(Var x) {
  Tensor out = x.value();
  out.set_requires_grad(false);
  for (double& v : out.buffer()) v = v > 0.0 ? v : 0.0;
  return x.graph().record(OpKind::Relu, {x}, std::move(out));
}

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out(a.value().shape());
  const auto& av = a.value().buffer();
  const auto& bv = b.value().buffer();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = av[k] + bv[k];
  return a.graph().record(OpKind::Add, {a, b}, std::move(out));
}

Var sub(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out(a.value().shape());
  const auto& av = a.value().buffer();
  const auto& bv = b.value().buffer();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = av[k] - bv[k];
  return a.graph().record(OpKind::Sub, {a, b}, std::move(out));
}

Var scale(Var x, double c) {
  Tensor out(x.value().shape());
  const auto& xv = x.value().buffer();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = c * xv[k];
  Graph::Saved saved;
  saved.scalar = c;
  return x.graph().record(OpKind::Scale, {x}, std::move(out), std::move(saved));
}

Var square(Var x) {
  Tensor out(x.value().shape());
  const auto& xv = x.value().buffer();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = xv[k] * xv[k];
  return x.graph().record(OpKind::Square, {x}, std::move(out));
}

Var reduce(Var x, Reduction kind) {
  const auto& xv = x.value().buffer();
  if (xv.empty()) throw PreconditionError("reduce over an empty tensor");
  double s = 0.0;
  for (double v : xv) s += v;
  if (kind == Reduction::Mean) s /= static_cast<double>(xv.size());
  return x.graph().record(kind == Reduction::Sum ? OpKind::Sum : OpKind::Mean, {x},
                          Tensor::scalar(s));
}

Var sum(Var x) { return reduce(x, Reduction::Sum); }
Var mean(Var x) { return reduce(x, Reduction::Mean); }

Var weighted_sum(Var x, std::vector<double> weights) {
  const auto& xv = x.value().buffer();
  if (weights.size() != xv.size()) {
    throw DimensionError("weighted_sum: " + std::to_string(weights.size()) +
                         " weights for tensor of size " + std::to_string(xv.size()));
  }
  double s = 0.0;
  for (std::size_t k = 0; k < xv.size(); ++k) s += weights[k] * xv[k];
  Graph::Saved saved;
  saved.weights = std::move(weights);
  return x.graph().record(OpKind::WeightedSum, {x}, Tensor::scalar(s), std::move(saved));
}

namespace {

Var pairwise(Var A, Var B, bool squared) {
  const Tensor& a = A.value();
  const Tensor& b = B.value();
  require_matrix(a, "pairwise");
  require_matrix(b, "pairwise");
  if (a.cols() != b.cols()) {
    throw DimensionError("pairwise: width mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
  const std::size_t N = a.rows(), M = b.rows(), D = a.cols();
  Tensor out(Shape{N, M});
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < M; ++j) {
      double s = 0.0;
      for (std::size_t d = 0; d < D; ++d) {
        const double diff = a.at(i, d) - b.at(j, d);
        s += diff * diff;
      }
      out.at(i, j) = squared ? s : std::sqrt(s + kDistanceSmoothing);
    }
  }
  return A.graph().record(squared ? OpKind::PairwiseSqDistance : OpKind::PairwiseDistance,
                          {A, B}, std::move(out));
}

}  // namespace

Var pairwise_euclidean(Var A, Var B) { return pairwise(A, B, false); }
Var pairwise_sq_euclidean(Var A, Var B) { return pairwise(A, B, true); }

Var concat_cols(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix(av, "concat_cols");
  require_matrix(bv, "concat_cols");
  if (av.rows() != bv.rows()) throw DimensionError("concat_cols: row mismatch");
  const std::size_t R = av.rows(), ca = av.cols(), cb = bv.cols();
  Tensor out(Shape{R, ca + cb});
  for (std::size_t r = 0; r < R; ++r) {
    std::copy_n(av.data().begin() + r * ca, ca, out.data().begin() + r * (ca + cb));
    std::copy_n(bv.data().begin() + r * cb, cb, out.data().begin() + r * (ca + cb) + ca);
  }
  return a.graph().record(OpKind::ConcatCols, {a, b}, std::move(out));
}

Var gather_rows(Var x, std::vector<std::size_t> rows) {
  const Tensor& xv = x.value();
  require_matrix(xv, "gather_rows");
  const std::size_t C = xv.cols();
  Tensor out(Shape{rows.size(), C});
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] >= xv.rows()) throw DimensionError("gather_rows: index out of range");
    std::copy_n(xv.data().begin() + rows[k] * C, C, out.data().begin() + k * C);
  }
  Graph::Saved saved;
  saved.index = std::move(rows);
  return x.graph().record(OpKind::GatherRows, {x}, std::move(out), std::move(saved));
}

}  // namespace got
