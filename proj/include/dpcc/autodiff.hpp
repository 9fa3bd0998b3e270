// Reverse-mode automatic differentiation over Eigen matrices, sized for the
// networks in this codebase: a dynamic tape of shared_ptr nodes, double
// precision throughout so finite-difference checks are meaningful.
#pragma once

#include "dpcc/common.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace dpcc::nn {

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Mat value;
  Mat grad;  // empty until backward touches it; then same shape as value
  bool requires_grad = false;
  std::vector<Var> parents;
  std::function<void(const Mat&)> backprop;  // pushes a given output grad into parents

  explicit Node(Mat v, bool rg = false) : value(std::move(v)), requires_grad(rg) {}
};

/// Tape recording is on by default; NoGradGuard switches it off for a scope
/// (inference paths build no graph and allocate no closures).
bool grad_enabled();

class NoGradGuard {
public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
  bool prev_;
};

Var constant(Mat v);
Var make_param(Mat v);

/// Run backpropagation from a scalar (1x1) loss. Parameter gradients
/// accumulate into Node::grad; call ParameterStore::zero_grad between steps.
void backward(const Var& loss);

// ---- elementwise arithmetic ----
// The right operand may broadcast: 1x1 (scalar), 1xN (row over rows), or
// Mx1 (column over columns). The left operand never broadcasts.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var neg(const Var& a);
Var add_scalar(const Var& a, double s);
Var mul_scalar(const Var& a, double s);

// ---- elementwise nonlinearities ----
Var silu(const Var& a);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var softplus(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var erf(const Var& a);
Var square(const Var& a);
Var clamp_min(const Var& a, double lo);

// ---- reductions and shape ops ----
Var sum_all(const Var& a);   // 1x1
Var mean_all(const Var& a);  // 1x1
Var mean_rows(const Var& a); // 1xN: mean over rows
Var row_sum(const Var& a);   // Mx1: sum over columns
/// Rows are n_groups consecutive blocks of equal size; per-group, per-column
/// max. Ties route the gradient to the lowest row in the group.
Var group_max(const Var& a, int n_groups);
Var gather_rows(const Var& a, const std::vector<int>& idx);
Var concat_cols(const Var& a, const Var& b);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index len);
/// Row-major relayout to rows x cols; element count must be preserved.
Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols);

// ---- fused layers ----
/// Per-row normalization to zero mean / unit variance, no learned affine.
Var layer_norm(const Var& a, double eps = 1e-5);
Var softmax_rows(const Var& a);
/// x*W + b with b broadcast over rows.
Var linear(const Var& x, const Var& W, const Var& b);
/// Symmetric Chamfer distance between two point sets (rows are points),
/// differentiable through the nearest-neighbor matching chosen at forward
/// time. Scalar 1x1 output.
Var chamfer(const Var& a, const Var& b);

// ---- parameters and optimization ----

/// Named parameter registry. Registration order is the canonical order for
/// serialization and optimizer state.
class ParameterStore {
public:
  Var create(const std::string& name, Mat init);
  Var get(const std::string& name) const;
  bool has(const std::string& name) const;
  const std::vector<std::pair<std::string, Var>>& entries() const { return entries_; }
  Eigen::Index total_size() const;
  void zero_grad();

private:
  std::vector<std::pair<std::string, Var>> entries_;
};

class Adam {
public:
  explicit Adam(ParameterStore& params, double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  void step();

private:
  ParameterStore& params_;
  double lr_, beta1_, beta2_, eps_;
  long long t_ = 0;
  std::vector<Mat> m_, v_;
};

/// Glorot-uniform weight init: limit sqrt(6 / (fan_in + fan_out)).
Mat glorot(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng);

}  // namespace dpcc::nn
