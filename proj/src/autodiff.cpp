#include "adaptcm/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace adaptcm::ad {

namespace {

constexpr NodeId kNone = static_cast<NodeId>(-1);

Graph& same_graph(const Var& a, const Var& b) {
  if (a.graph() == nullptr || a.graph() != b.graph()) {
    throw std::invalid_argument("operands belong to different graphs");
  }
  return *a.graph();
}

Graph& graph_of(const Var& a) {
  if (a.graph() == nullptr) throw std::invalid_argument("unbound expression handle");
  return *a.graph();
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::Input: return "input";
    case Op::Const: return "const";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Neg: return "neg";
    case Op::Tanh: return "tanh";
    case Op::Exp: return "exp";
    case Op::Sqrt: return "sqrt";
    case Op::Relu: return "relu";
  }
  return "?";
}

double Gradient::wrt(NodeId input_node) const {
  auto it = std::find(inputs.begin(), inputs.end(), input_node);
  if (it == inputs.end()) throw std::out_of_range("node is not an input of the graph");
  return values[static_cast<std::size_t>(it - inputs.begin())];
}

NodeId Graph::push(Op op, NodeId lhs, NodeId rhs, double value) {
  const auto id = static_cast<NodeId>(nodes_.size());
  nodes_.push_back({op, lhs, rhs});
  values_.push_back(value);
  evaluated_ = false;
  return id;
}

void Graph::check_operand(NodeId id) const {
  if (id >= nodes_.size()) throw std::out_of_range("operand id not in graph");
}

NodeId Graph::input() {
  const NodeId id = push(Op::Input, kNone, kNone, 0.0);
  inputs_.push_back(id);
  return id;
}

NodeId Graph::constant(double value) { return push(Op::Const, kNone, kNone, value); }

NodeId Graph::unary(Op op, NodeId a) {
  check_operand(a);
  switch (op) {
    case Op::Neg:
    case Op::Tanh:
    case Op::Exp:
    case Op::Sqrt:
    case Op::Relu:
      return push(op, a, kNone, 0.0);
    default:
      throw std::invalid_argument(std::string("not a unary op: ") + op_name(op));
  }
}

NodeId Graph::binary(Op op, NodeId a, NodeId b) {
  check_operand(a);
  check_operand(b);
  switch (op) {
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div:
      return push(op, a, b, 0.0);
    default:
      throw std::invalid_argument(std::string("not a binary op: ") + op_name(op));
  }
}

void Graph::forward(std::span<const double> in) {
  if (in.size() != inputs_.size()) {
    throw std::invalid_argument("forward: expected " + std::to_string(inputs_.size()) +
                                " inputs, got " + std::to_string(in.size()));
  }
  std::size_t next_input = 0;
  double* v = values_.data();
  const Node* nodes = nodes_.data();
  const std::size_t count = nodes_.size();
  for (std::size_t i = 0; i < count; ++i) {
    const Node& n = nodes[i];
    switch (n.op) {
      case Op::Input: v[i] = in[next_input++]; break;
      case Op::Const: break;
      case Op::Add: v[i] = v[n.lhs] + v[n.rhs]; break;
      case Op::Sub: v[i] = v[n.lhs] - v[n.rhs]; break;
      case Op::Mul: v[i] = v[n.lhs] * v[n.rhs]; break;
      case Op::Div:
        if (v[n.rhs] == 0.0) {
          throw DomainError(static_cast<NodeId>(i),
                            "division by zero at node " + std::to_string(i));
        }
        v[i] = v[n.lhs] / v[n.rhs];
        break;
      case Op::Neg: v[i] = -v[n.lhs]; break;
      case Op::Tanh: v[i] = std::tanh(v[n.lhs]); break;
      case Op::Exp: v[i] = std::exp(v[n.lhs]); break;
      case Op::Sqrt:
        if (v[n.lhs] < 0.0) {
          throw DomainError(static_cast<NodeId>(i),
                            "sqrt of negative value at node " + std::to_string(i));
        }
        v[i] = std::sqrt(v[n.lhs]);
        break;
      case Op::Relu: v[i] = v[n.lhs] > 0.0 ? v[n.lhs] : 0.0; break;
    }
  }
  evaluated_ = true;
}

std::vector<double> Graph::forward(std::span<const double> in,
                                   std::span<const NodeId> outputs) {
  forward(in);
  std::vector<double> out;
  out.reserve(outputs.size());
  for (NodeId id : outputs) out.push_back(value(id));
  return out;
}

void Graph::sweep_backward() {
  const double* v = values_.data();
  double* adj = adjoints_.data();
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    const double a = adj[i];
    if (a == 0.0) continue;
    const Node& n = nodes_[i];
    switch (n.op) {
      case Op::Input:
      case Op::Const: break;
      case Op::Add:
        adj[n.lhs] += a;
        adj[n.rhs] += a;
        break;
      case Op::Sub:
        adj[n.lhs] += a;
        adj[n.rhs] -= a;
        break;
      case Op::Mul:
        adj[n.lhs] += a * v[n.rhs];
        adj[n.rhs] += a * v[n.lhs];
        break;
      case Op::Div: {
        const double inv = 1.0 / v[n.rhs];
        adj[n.lhs] += a * inv;
        adj[n.rhs] -= a * v[i] * inv;
        break;
      }
      case Op::Neg: adj[n.lhs] -= a; break;
      case Op::Tanh: adj[n.lhs] += a * (1.0 - v[i] * v[i]); break;
      case Op::Exp: adj[n.lhs] += a * v[i]; break;
      case Op::Sqrt: adj[n.lhs] += a * 0.5 / v[i]; break;
      case Op::Relu:
        if (v[n.lhs] > 0.0) adj[n.lhs] += a;
        break;
    }
  }
}

Gradient Graph::backward(NodeId output) {
  if (output >= nodes_.size()) throw std::out_of_range("backward: output node not in graph");
  Gradient g;
  g.inputs = inputs_;
  g.values.assign(inputs_.size(), 0.0);
  const std::pair<NodeId, double> seed{output, 1.0};
  backward(std::span(&seed, 1), g.values);
  return g;
}

void Graph::backward(std::span<const std::pair<NodeId, double>> seeds, std::span<double> out) {
  if (!evaluated_) throw std::logic_error("backward called before forward");
  if (out.size() != inputs_.size()) throw std::invalid_argument("backward: output span size");
  adjoints_.assign(nodes_.size(), 0.0);
  for (const auto& [id, s] : seeds) {
    if (id >= nodes_.size()) throw std::out_of_range("backward: output node not in graph");
    adjoints_[id] += s;
  }
  sweep_backward();
  for (std::size_t k = 0; k < inputs_.size(); ++k) out[k] += adjoints_[inputs_[k]];
}

// ---- Var ----

Var input(Graph& g) { return {&g, g.input()}; }
Var constant(Graph& g, double v) { return {&g, g.constant(v)}; }

Var operator+(Var a, Var b) {
  Graph& g = same_graph(a, b);
  return {&g, g.binary(Op::Add, a.id(), b.id())};
}
Var operator-(Var a, Var b) {
  Graph& g = same_graph(a, b);
  return {&g, g.binary(Op::Sub, a.id(), b.id())};
}
Var operator*(Var a, Var b) {
  Graph& g = same_graph(a, b);
  return {&g, g.binary(Op::Mul, a.id(), b.id())};
}
Var operator/(Var a, Var b) {
  Graph& g = same_graph(a, b);
  return {&g, g.binary(Op::Div, a.id(), b.id())};
}
Var operator-(Var a) {
  Graph& g = graph_of(a);
  return {&g, g.unary(Op::Neg, a.id())};
}
Var operator+(Var a, double b) { return a + constant(graph_of(a), b); }
Var operator*(double a, Var b) { return constant(graph_of(b), a) * b; }
Var operator-(double a, Var b) { return constant(graph_of(b), a) - b; }

Var tanh(Var a) {
  Graph& g = graph_of(a);
  return {&g, g.unary(Op::Tanh, a.id())};
}
Var exp(Var a) {
  Graph& g = graph_of(a);
  return {&g, g.unary(Op::Exp, a.id())};
}
Var sqrt(Var a) {
  Graph& g = graph_of(a);
  return {&g, g.unary(Op::Sqrt, a.id())};
}
Var relu(Var a) {
  Graph& g = graph_of(a);
  return {&g, g.unary(Op::Relu, a.id())};
}

// ---- ExprMatrix ----

ExprMatrix ExprMatrix::transpose() const {
  ExprMatrix t(cols_, rows_, Var{});
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

ExprMatrix operator*(const ExprMatrix& a, const ExprMatrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matrix product shape mismatch");
  ExprMatrix out(a.rows(), b.cols(), Var{});
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < b.cols(); ++c) {
      Var acc = a(r, 0) * b(0, c);
      for (std::size_t k = 1; k < a.cols(); ++k) acc = acc + a(r, k) * b(k, c);
      out(r, c) = acc;
    }
  }
  return out;
}

ExprMatrix operator+(const ExprMatrix& a, const ExprMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("matrix sum shape mismatch");
  ExprMatrix out(a.rows(), a.cols(), Var{});
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) = a(r, c) + b(r, c);
  return out;
}

ExprMatrix operator*(double s, const ExprMatrix& a) {
  ExprMatrix out(a.rows(), a.cols(), Var{});
  if (a.rows() == 0 || a.cols() == 0) return out;
  const Var k = constant(*a(0, 0).graph(), s);
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) = k * a(r, c);
  return out;
}

ExprMatrix operator-(const ExprMatrix& a) {
  ExprMatrix out(a.rows(), a.cols(), Var{});
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) = -a(r, c);
  return out;
}

namespace {

// Laplace expansion along the first row of the block selected by `rows`/`cols`.
Var cofactor_det(const ExprMatrix& m, const std::vector<std::size_t>& rows,
                 const std::vector<std::size_t>& cols) {
  const std::size_t n = rows.size();
  if (n == 1) return m(rows[0], cols[0]);
  if (n == 2) {
    return m(rows[0], cols[0]) * m(rows[1], cols[1]) - m(rows[0], cols[1]) * m(rows[1], cols[0]);
  }
  const std::vector<std::size_t> sub_rows(rows.begin() + 1, rows.end());
  Var acc;
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<std::size_t> sub_cols;
    sub_cols.reserve(n - 1);
    for (std::size_t k = 0; k < n; ++k)
      if (k != j) sub_cols.push_back(cols[k]);
    const Var term = m(rows[0], cols[j]) * cofactor_det(m, sub_rows, sub_cols);
    if (j == 0) {
      acc = term;
    } else {
      acc = (j % 2 == 0) ? acc + term : acc - term;
    }
  }
  return acc;
}

void require_square_small(const ExprMatrix& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("determinant of non-square matrix");
  if (m.rows() == 0) throw std::invalid_argument("determinant of empty matrix");
  if (m.rows() > 4) {
    throw UnsupportedDimension("cofactor determinants are limited to n <= 4, got n = " +
                               std::to_string(m.rows()));
  }
}

}  // namespace

Var determinant(const ExprMatrix& m) {
  require_square_small(m);
  std::vector<std::size_t> idx(m.rows());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return cofactor_det(m, idx, idx);
}

std::vector<Var> det_leading_minors(const ExprMatrix& m) {
  require_square_small(m);
  std::vector<Var> minors;
  minors.reserve(m.rows());
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    idx.push_back(i);
    minors.push_back(cofactor_det(m, idx, idx));
  }
  return minors;
}

}  // namespace adaptcm::ad
