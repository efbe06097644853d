#include "maae/autodiff.hpp"

#include "maae/errors.hpp"

#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <utility>

namespace maae::ad {

namespace {

thread_local bool g_grad_enabled = true;

Var make_result(Matrix value, std::vector<Var> inputs, BackwardFn backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool tracked = false;
  if (g_grad_enabled) {
    for (const auto& in : inputs) tracked = tracked || in.requires_grad();
  }
  if (tracked) {
    node->requires_grad = true;
    node->inputs = std::move(inputs);
    node->backward = std::move(backward);
  }
  return Var(std::move(node));
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

Var transpose(const Var& a) {
  return make_result(a.value().transpose(), {a},
                     [](const Var& g, const std::vector<bool>&) -> std::vector<Var> {
                       return {transpose(g)};
                     });
}

}  // namespace

const Matrix& Var::value() const { return node_->value; }

Matrix& Var::mutable_value() { return node_->value; }

bool Var::requires_grad() const { return node_ && node_->requires_grad; }

double Var::scalar() const {
  if (rows() != 1 || cols() != 1) throw ShapeError("scalar(): Var is not 1x1");
  return node_->value(0, 0);
}

GradModeGuard::GradModeGuard(bool enabled) : previous_(g_grad_enabled) { g_grad_enabled = enabled; }
GradModeGuard::~GradModeGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

Var leaf(Matrix value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return Var(std::move(node));
}

Var constant(Matrix value) { return leaf(std::move(value), false); }

Var scalar_constant(double v) { return constant(Matrix::Constant(1, 1, v)); }

Var clone_leaf(const Var& v) { return leaf(v.value(), v.requires_grad()); }

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions " + std::to_string(a.cols()) + " and " +
                     std::to_string(b.rows()) + " differ");
  }
  Matrix out = a.value() * b.value();
  return make_result(std::move(out), {a, b},
                     [a, b](const Var& g, const std::vector<bool>& needed) -> std::vector<Var> {
                       std::vector<Var> r(2);
                       if (needed[0]) r[0] = matmul(g, transpose(b));
                       if (needed[1]) r[1] = matmul(transpose(a), g);
                       return r;
                     });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return make_result(a.value() + b.value(), {a, b},
                     [](const Var& g, const std::vector<bool>&) -> std::vector<Var> {
                       return {g, g};
                     });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  return make_result(a.value() - b.value(), {a, b},
                     [](const Var& g, const std::vector<bool>& needed) -> std::vector<Var> {
                       return {g, needed[1] ? neg(g) : Var()};
                     });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  return make_result(a.value().cwiseProduct(b.value()), {a, b},
                     [a, b](const Var& g, const std::vector<bool>& needed) -> std::vector<Var> {
                       std::vector<Var> r(2);
                       if (needed[0]) r[0] = mul(g, b);
                       if (needed[1]) r[1] = mul(g, a);
                       return r;
                     });
}

Var scale(const Var& a, double c) {
  return make_result(a.value() * c, {a},
                     [c](const Var& g, const std::vector<bool>&) -> std::vector<Var> {
                       return {scale(g, c)};
                     });
}

Var add_scalar(const Var& a, double c) {
  return make_result(a.value().array() + c, {a},
                     [](const Var& g, const std::vector<bool>&) -> std::vector<Var> {
                       return {g};
                     });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ShapeError("add_row: row shape mismatch");
  Matrix out = a.value().rowwise() + row.value().row(0);
  return make_result(std::move(out), {a, row},
                     [](const Var& g, const std::vector<bool>& needed) -> std::vector<Var> {
                       return {g, needed[1] ? sum_rows(g) : Var()};
                     });
}

Var mul_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ShapeError("mul_row: row shape mismatch");
  Matrix out = a.value().array().rowwise() * row.value().row(0).array();
  return make_result(std::move(out), {a, row},
                     [a, row](const Var& g, const std::vector<bool>& needed) -> std::vector<Var> {
                       std::vector<Var> r(2);
                       if (needed[0]) r[0] = mul_row(g, row);
                       if (needed[1]) r[1] = sum_rows(mul(g, a));
                       return r;
                     });
}

Var mul_col(const Var& a, const Var& col) {
  if (col.cols() != 1 || col.rows() != a.rows()) throw ShapeError("mul_col: column shape mismatch");
  Matrix out = a.value().array().colwise() * col.value().col(0).array();
  return make_result(std::move(out), {a, col},
                     [a, col](const Var& g, const std::vector<bool>& needed) -> std::vector<Var> {
                       std::vector<Var> r(2);
                       if (needed[0]) r[0] = mul_col(g, col);
                       if (needed[1]) r[1] = sum_cols(mul(g, a));
                       return r;
                     });
}

Var sum(const Var& a) {
  const auto rows = a.rows();
  const auto cols = a.cols();
  return make_result(Matrix::Constant(1, 1, a.value().sum()), {a},
                     [rows, cols](const Var& g, const std::vector<bool>&) -> std::vector<Var> {
                       return {expand_scalar(g, rows, cols)};
                     });
}

Var mean(const Var& a) {
  return scale(sum(a), 1.0 / static_cast<double>(a.rows() * a.cols()));
}

Var sum_rows(const Var& a) {
  const auto rows = a.rows();
  return make_result(a.value().colwise().sum(), {a},
                     [rows](const Var& g, const std::vector<bool>&) -> std::vector<Var> {
                       return {expand_rows(g, rows)};
                     });
}

Var sum_cols(const Var& a) {
  const auto cols = a.cols();
  return make_result(a.value().rowwise().sum(), {a},
                     [cols](const Var& g, const std::vector<bool>&) -> std::vector<Var> {
                       return {expand_cols(g, cols)};
                     });
}

Var expand_rows(const Var& row, Eigen::Index rows) {
  if (row.rows() != 1) throw ShapeError("expand_rows: expected a row vector");
  Matrix out = row.value().replicate(rows, 1);
  return make_result(std::move(out), {row},
                     [](const Var& g, const std::vector<bool>&) -> std::vector<Var> {
                       return {sum_rows(g)};
                     });
}

Var expand_cols(const Var& col, Eigen::Index cols) {
  if (col.cols() != 1) throw ShapeError("expand_cols: expected a column vector");
  Matrix out = col.value().replicate(1, cols);
  return make_result(std::move(out), {col},
                     [](const Var& g, const std::vector<bool>&) -> std::vector<Var> {
                       return {sum_cols(g)};
                     });
}

Var expand_scalar(const Var& s, Eigen::Index rows, Eigen::Index cols) {
  if (s.rows() != 1 || s.cols() != 1) throw ShapeError("expand_scalar: expected 1x1");
  return make_result(Matrix::Constant(rows, cols, s.value()(0, 0)), {s},
                     [](const Var& g, const std::vector<bool>&) -> std::vector<Var> {
                       return {sum(g)};
                     });
}

Var square(const Var& a) {
  return make_result(a.value().array().square().matrix(), {a},
                     [a](const Var& g, const std::vector<bool>&) -> std::vector<Var> {
                       return {mul(g, scale(a, 2.0))};
                     });
}

Var exp(const Var& a) {
  return make_result(a.value().array().exp().matrix(), {a},
                     [a](const Var& g, const std::vector<bool>&) -> std::vector<Var> {
                       return {mul(g, exp(a))};
                     });
}

Var abs(const Var& a) {
  return make_result(a.value().cwiseAbs(), {a},
                     [a](const Var& g, const std::vector<bool>&) -> std::vector<Var> {
                       Matrix sign = a.value().unaryExpr(
                           [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
                       return {mul(g, constant(std::move(sign)))};
                     });
}

Var leaky_relu(const Var& a, double slope) {
  Matrix out = a.value().unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
  return make_result(std::move(out), {a},
                     [a, slope](const Var& g, const std::vector<bool>&) -> std::vector<Var> {
                       Matrix d = a.value().unaryExpr(
                           [slope](double v) { return v > 0.0 ? 1.0 : slope; });
                       return {mul(g, constant(std::move(d)))};
                     });
}

Var sigmoid(const Var& a) {
  Matrix out = a.value().unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  return make_result(std::move(out), {a},
                     [a](const Var& g, const std::vector<bool>&) -> std::vector<Var> {
                       Var s = sigmoid(a);
                       return {mul(g, mul(s, add_scalar(neg(s), 1.0)))};
                     });
}

Var safe_reciprocal(const Var& a) {
  Matrix out = a.value().unaryExpr([](double v) { return v > 0.0 ? 1.0 / v : 0.0; });
  return make_result(std::move(out), {a},
                     [a](const Var& g, const std::vector<bool>&) -> std::vector<Var> {
                       return {mul(g, neg(square(safe_reciprocal(a))))};
                     });
}

Var row_norm(const Var& a) {
  Matrix out = a.value().rowwise().norm();
  return make_result(std::move(out), {a},
                     [a](const Var& g, const std::vector<bool>&) -> std::vector<Var> {
                       return {mul_col(a, mul(g, safe_reciprocal(row_norm(a))))};
                     });
}

Var mask_gate(const Var& a) {
  Matrix out = a.value().unaryExpr([](double t) { return std::max(0.0, 1.0 - std::exp(-t)); });
  return make_result(std::move(out), {a},
                     [a](const Var& g, const std::vector<bool>&) -> std::vector<Var> {
                       Matrix active =
                           a.value().unaryExpr([](double t) { return t > 0.0 ? 1.0 : 0.0; });
                       return {mul(g, mul(exp(neg(a)), constant(std::move(active))))};
                     });
}

std::vector<Var> grad(const Var& output, std::span<const Var> wrt, bool create_graph) {
  if (output.rows() != 1 || output.cols() != 1) {
    throw ShapeError("grad: output must be a 1x1 scalar");
  }
  std::optional<NoGradGuard> guard;
  if (!create_graph) guard.emplace();

  std::unordered_set<const Node*> targets;
  for (const auto& w : wrt) targets.insert(w.node());

  // Post-order over the recorded graph: inputs precede their consumers.
  std::vector<Node*> order;
  if (output.requires_grad()) {
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(output.node(), 0);
    visited.insert(output.node());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->inputs.size()) {
        Node* child = node->inputs[next++].node();
        if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
  }

  std::unordered_map<const Node*, bool> needed;
  for (Node* node : order) {
    bool n = targets.contains(node);
    for (const auto& in : node->inputs) {
      if (in.requires_grad() && needed[in.node()]) n = true;
    }
    needed[node] = n;
  }

  std::unordered_map<const Node*, Var> grads;
  if (!order.empty()) grads[output.node()] = constant(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (!needed[node] || !node->backward) continue;
    auto found = grads.find(node);
    if (found == grads.end()) continue;
    std::vector<bool> input_needed(node->inputs.size());
    bool any = false;
    for (std::size_t i = 0; i < node->inputs.size(); ++i) {
      const auto& in = node->inputs[i];
      input_needed[i] = in.requires_grad() && needed[in.node()];
      any = any || input_needed[i];
    }
    if (!any) continue;
    const Var g_out = found->second;
    auto input_grads = node->backward(g_out, input_needed);
    for (std::size_t i = 0; i < node->inputs.size(); ++i) {
      if (!input_needed[i] || !input_grads[i].defined()) continue;
      const Node* key = node->inputs[i].node();
      auto existing = grads.find(key);
      if (existing == grads.end()) {
        grads.emplace(key, input_grads[i]);
      } else {
        existing->second = add(existing->second, input_grads[i]);
      }
    }
  }

  std::vector<Var> result;
  result.reserve(wrt.size());
  for (const auto& w : wrt) {
    auto found = grads.find(w.node());
    if (found != grads.end()) {
      result.push_back(found->second);
    } else {
      result.push_back(constant(Matrix::Zero(w.rows(), w.cols())));
    }
  }
  return result;
}

}  // namespace maae::ad
