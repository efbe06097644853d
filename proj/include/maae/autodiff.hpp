#pragma once

// Minimal reverse-mode automatic differentiation over dense Eigen matrices.
//
// Backward rules are themselves written in terms of Var operations, so a
// gradient computed with `create_graph = true` is an ordinary differentiable
// Var. That is what the Wasserstein gradient penalty needs: the penalty is a
// function of an input-gradient of the critic, and training the critic
// differentiates through it.

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace maae::ad {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

struct Node;

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  bool defined() const { return static_cast<bool>(node_); }
  const Matrix& value() const;
  // Only meaningful for leaves; used by optimizers and finite-difference
  // probes. Any graph built from the old value is invalidated.
  Matrix& mutable_value();
  bool requires_grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;

  Node* node() const { return node_.get(); }

 private:
  std::shared_ptr<Node> node_;
};

using BackwardFn =
    std::function<std::vector<Var>(const Var& grad_out, const std::vector<bool>& needed)>;

struct Node {
  Matrix value;
  bool requires_grad = false;
  std::vector<Var> inputs;
  BackwardFn backward;
};

// Sets graph recording on the current thread for its lifetime.
class GradModeGuard {
 public:
  explicit GradModeGuard(bool enabled);
  ~GradModeGuard();
  GradModeGuard(const GradModeGuard&) = delete;
  GradModeGuard& operator=(const GradModeGuard&) = delete;

 private:
  bool previous_;
};

class NoGradGuard : public GradModeGuard {
 public:
  NoGradGuard() : GradModeGuard(false) {}
};

bool grad_enabled();

Var leaf(Matrix value, bool requires_grad = true);
Var constant(Matrix value);
Var scalar_constant(double v);

// Copies the value into a fresh leaf with the same requires_grad flag.
Var clone_leaf(const Var& v);

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);
Var neg(const Var& a);

// a: r x c, row: 1 x c, broadcast over rows.
Var add_row(const Var& a, const Var& row);
Var mul_row(const Var& a, const Var& row);
// a: r x c, col: r x 1, broadcast over columns.
Var mul_col(const Var& a, const Var& col);

Var sum(const Var& a);            // -> 1 x 1
Var mean(const Var& a);           // -> 1 x 1
Var sum_rows(const Var& a);       // r x c -> 1 x c
Var sum_cols(const Var& a);       // r x c -> r x 1
Var expand_rows(const Var& row, Eigen::Index rows);
Var expand_cols(const Var& col, Eigen::Index cols);
Var expand_scalar(const Var& s, Eigen::Index rows, Eigen::Index cols);

Var square(const Var& a);
Var exp(const Var& a);
Var abs(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var sigmoid(const Var& a);
// x -> 1/x for x > 0, 0 otherwise.
Var safe_reciprocal(const Var& a);
// Euclidean norm of each row, r x c -> r x 1. The subgradient at a zero row
// is taken to be zero.
Var row_norm(const Var& a);
// Mask gate b(t) = max(0, 1 - exp(-t)); the derivative is zero for t <= 0.
Var mask_gate(const Var& a);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator*(double c, const Var& a) { return scale(a, c); }
inline Var operator-(const Var& a) { return neg(a); }

// Gradients of a 1x1 `output` with respect to each Var in `wrt`. Targets that
// do not influence the output receive a zero matrix. With `create_graph` the
// returned gradients are themselves differentiable.
std::vector<Var> grad(const Var& output, std::span<const Var> wrt, bool create_graph = false);

}  // namespace maae::ad
