#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "got/tensor.hpp"

namespace got {

enum class OpKind : std::uint8_t {
  Leaf,
  Constant,
  Linear,
  Relu,
  Add,
  Sub,
  Scale,
  Square,
  Sum,
  Mean,
  WeightedSum,
  PairwiseDistance,
  PairwiseSqDistance,
  ConcatCols,
  GatherRows,
};

const char* op_name(OpKind kind);

class Graph;

// Per-op data kept for the backward rule.
struct NodeSaved {
  std::vector<double> weights;
  std::vector<std::size_t> index;
  double scalar = 0.0;
};

/// Handle to a node of a Graph. Cheap to copy; valid while its graph lives.
class Var {
 public:
  Var() = default;

  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  double item() const { return value().item(); }

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Append-only computation tape, rebuilt for every forward pass.
///
/// Nodes are stored in creation order, so inputs always precede consumers and
/// a single reverse sweep visits each node once. Gradients reach only leaves
/// bound with `leaf()` whose tensor has `requires_grad()` set; they are
/// accumulated, never overwritten.
class Graph {
 public:
  using Saved = NodeSaved;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  Var leaf(Tensor& tensor);
  Var frozen(const Tensor& tensor);

  const Tensor& value(const Var& v) const;
  bool needs_grad(const Var& v) const { return nodes_.at(v.id()).needs_grad; }
  OpKind kind(const Var& v) const { return nodes_.at(v.id()).kind; }
  std::size_t size() const { return nodes_.size(); }

  void backward(const Var& loss);

  // Number of nodes whose backward rule ran during the last backward().
  std::size_t last_backward_visits() const { return last_visits_; }

  // Throw NumericalError on any non-finite forward value or adjoint.
  void set_finite_checks(bool enabled) { finite_checks_ = enabled; }

  Var record(OpKind kind, std::initializer_list<Var> inputs, Tensor value,
             Saved saved = {});

 private:
  struct Node {
    OpKind kind = OpKind::Constant;
    std::vector<std::size_t> inputs;
    Tensor value;
    const Tensor* external = nullptr;
    Tensor* sink = nullptr;
    bool needs_grad = false;
    Saved saved;
  };

  const Tensor& node_value(const Node& n) const {
    return n.external ? *n.external : n.value;
  }
  void check_owned(const Var& v) const;
  void propagate(std::size_t id, std::span<const double> g,
                 std::vector<std::vector<double>>& adj);

  std::vector<Node> nodes_;
  bool finite_checks_ = false;
  std::size_t last_visits_ = 0;
};

enum class Reduction { Sum, Mean };

// out = x W + b with x [B,I], W [I,O], b [O].
Var linear(Var x, Var W, Var b);
Var relu(Var x);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var x, double c);
Var square(Var x);
Var reduce(Var x, Reduction kind);
Var sum(Var x);
Var mean(Var x);
// sum_i w_i x_i over the flat buffer; w must match x's size.
Var weighted_sum(Var x, std::vector<double> weights);

inline constexpr double kDistanceSmoothing = 1e-12;

// out[i,j] = sqrt(|A_i - B_j|^2 + 1e-12).
Var pairwise_euclidean(Var A, Var B);
// out[i,j] = |A_i - B_j|^2.
Var pairwise_sq_euclidean(Var A, Var B);
Var concat_cols(Var a, Var b);
Var gather_rows(Var x, std::vector<std::size_t> rows);

}  // namespace got
