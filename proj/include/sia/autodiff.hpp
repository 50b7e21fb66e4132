// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Reverse-mode automatic differentiation over dense double matrices.
//
// A graph is built implicitly by calling the ops below on Vars; `backward`
// on a 1x1 result propagates gradients to every leaf that requires them.
// Nodes that depend on no gradient-requiring leaf record no closure, so a
// forward over frozen inputs costs the same as plain Eigen code.

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sia::ad {

using Matrix = Eigen::MatrixXd;

struct Node {
  Matrix value;
  Matrix grad;  // empty until a gradient arrives
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  void accumulate(const Matrix& g);
  bool has_grad() const { return grad.size() != 0; }
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  bool defined() const { return node_ != nullptr; }
  const Matrix& value() const { return node_->value; }
  /// Mutable access for leaves (optimizer updates, finite differences).
  Matrix& mutable_value() { return node_->value; }
  /// Gradient of the last backward pass; zeros when none arrived.
  Matrix grad() const;
  bool requires_grad() const { return node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double item() const;

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

Var constant(Matrix value);
Var leaf(Matrix value, bool requires_grad);

/// Builds a node from its value, inputs and a closure that reads `self.grad`
/// and accumulates into its inputs. The closure is dropped when no input
/// requires a gradient or when gradient recording is disabled.
Var make_op(Matrix value, std::vector<Var> inputs, std::function<void(Node&)> backward);

/// Seeds d(root)/d(root) = 1 and runs the reverse sweep.
void backward(const Var& root);

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};
bool grad_enabled();

Var matmul(const Var& a, const Var& b);
/// a * b^T
Var matmul_nt(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
/// Adds a 1 x n row to every row of a.
Var add_row(const Var& a, const Var& row);
Var scale(const Var& a, double s);
/// Multiplies by a learnable 1x1 scalar.
Var scale_by(const Var& a, const Var& s);
Var hadamard(const Var& a, const Var& b);
Var gelu(const Var& a);
Var sigmoid(const Var& a);
/// Row-wise softmax; with `causal`, entry (i,j) for j > i is masked out.
Var softmax_rows(const Var& a, bool causal = false);
Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
Var l2_normalize_rows(const Var& x);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var gather_rows(const Var& a, const std::vector<Eigen::Index>& rows);
Var sum_all(const Var& a);
Var mean_all(const Var& a);

struct Parameter {
  std::string path;
  Var var;
  bool trainable = true;
};

/// Named leaves in insertion order.
class ParameterSet {
 public:
  Var add(const std::string& path, Matrix init, bool trainable);
  const Var& get(const std::string& path) const;
  bool contains(const std::string& path) const;
  std::vector<Parameter>& entries() { return entries_; }
  const std::vector<Parameter>& entries() const { return entries_; }
  void zero_grad();
  std::size_t scalar_count() const;

 private:
  std::vector<Parameter> entries_;
};

}  // namespace sia::ad
