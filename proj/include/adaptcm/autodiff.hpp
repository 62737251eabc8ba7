#pragma once

// Reverse-mode automatic differentiation over scalar expression graphs.
//
// A Graph is an append-only tape of scalar nodes. Every operand of a node has a
// smaller id than the node itself, so the tape order is a topological order and
// forward/backward sweeps are single linear passes. Graphs are built once and
// then re-evaluated with fresh input values as often as needed; only the cached
// values and adjoints change between evaluations.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace adaptcm::ad {

using NodeId = std::uint32_t;

enum class Op : std::uint8_t {
  Input,
  Const,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  Tanh,
  Exp,
  Sqrt,
  Relu,  // max(0, a); used by hinge losses
};

const char* op_name(Op op);

/// Raised by forward() when a node leaves its mathematical domain.
class DomainError : public std::domain_error {
 public:
  DomainError(NodeId node, const std::string& what)
      : std::domain_error(what), node_(node) {}
  NodeId node() const { return node_; }

 private:
  NodeId node_;
};

class UnsupportedDimension : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Partial derivatives of one output with respect to every input node.
struct Gradient {
  std::vector<NodeId> inputs;  // input node ids, in declaration order
  std::vector<double> values;  // values[i] = d output / d inputs[i]

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t input_index) const { return values[input_index]; }
  /// Lookup by node id; throws std::out_of_range for non-input ids.
  double wrt(NodeId input_node) const;
};

class Graph {
 public:
  NodeId input();
  NodeId constant(double value);
  NodeId unary(Op op, NodeId a);
  NodeId binary(Op op, NodeId a, NodeId b);

  std::size_t size() const { return nodes_.size(); }
  std::size_t num_inputs() const { return inputs_.size(); }
  const std::vector<NodeId>& inputs() const { return inputs_; }
  Op op(NodeId id) const { return nodes_.at(id).op; }
  std::pair<NodeId, NodeId> operands(NodeId id) const {
    const Node& n = nodes_.at(id);
    return {n.lhs, n.rhs};
  }

  /// Evaluates every node. `values` must hold one entry per declared input.
  void forward(std::span<const double> values);

  /// Same as forward() but also returns the values of `outputs`.
  std::vector<double> forward(std::span<const double> values,
                              std::span<const NodeId> outputs);

  double value(NodeId id) const { return values_.at(id); }
  bool evaluated() const { return evaluated_; }

  /// d output / d input for every declared input. Requires forward().
  Gradient backward(NodeId output);

  /// Vector-Jacobian product: accumulates sum_k seed_k * d out_k / d input
  /// into `out` (one slot per declared input, added to, not overwritten).
  void backward(std::span<const std::pair<NodeId, double>> seeds,
                std::span<double> out);

 private:
  struct Node {
    Op op;
    NodeId lhs;
    NodeId rhs;
  };

  NodeId push(Op op, NodeId lhs, NodeId rhs, double value);
  void check_operand(NodeId id) const;
  void sweep_backward();

  std::vector<Node> nodes_;
  std::vector<double> values_;
  std::vector<double> adjoints_;
  std::vector<NodeId> inputs_;
  bool evaluated_ = false;
};

/// Lightweight handle used to write expressions with ordinary operators.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, NodeId id) : graph_(graph), id_(id) {}

  Graph* graph() const { return graph_; }
  NodeId id() const { return id_; }
  double value() const { return graph_->value(id_); }

 private:
  Graph* graph_ = nullptr;
  NodeId id_ = 0;
};

Var input(Graph& g);
Var constant(Graph& g, double v);

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator-(Var a);
Var operator+(Var a, double b);
Var operator*(double a, Var b);
Var operator-(double a, Var b);
Var tanh(Var a);
Var exp(Var a);
Var sqrt(Var a);
Var relu(Var a);

/// Dense row-major matrix of expression handles.
class ExprMatrix {
 public:
  ExprMatrix() = default;
  ExprMatrix(std::size_t rows, std::size_t cols, Var fill)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  Var& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  Var operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  ExprMatrix transpose() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Var> data_;
};

ExprMatrix operator*(const ExprMatrix& a, const ExprMatrix& b);
ExprMatrix operator+(const ExprMatrix& a, const ExprMatrix& b);
ExprMatrix operator*(double s, const ExprMatrix& a);
ExprMatrix operator-(const ExprMatrix& a);

/// Determinant of the leading i x i block, for i = 1..n, by cofactor expansion.
/// Supports n <= 4.
std::vector<Var> det_leading_minors(const ExprMatrix& m);

/// Cofactor determinant of a square expression matrix (n <= 4).
Var determinant(const ExprMatrix& m);

}  // namespace adaptcm::ad
