// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#include "sia/autodiff.hpp"

#include <cmath>
#include <numbers>
#include <unordered_set>

#include "sia/errors.hpp"

namespace sia::ad {
namespace {

thread_local bool g_grad_enabled = true;

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ContractError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                        std::to_string(b.cols()));
  }
}

Node& in(Node& self, std::size_t i) { return *self.inputs[i]; }

}  // namespace

void Node::accumulate(const Matrix& g) {
  if (!requires_grad) return;
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Matrix Var::grad() const {
  if (node_->has_grad()) return node_->grad;
  return Matrix::Zero(node_->value.rows(), node_->value.cols());
}

double Var::item() const {
  if (node_->value.size() != 1) throw ContractError("item() on a non-scalar");
  return node_->value(0, 0);
}

Var constant(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var leaf(Matrix value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return Var(std::move(n));
}

Var make_op(Matrix value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  if (g_grad_enabled) {
    for (const auto& v : inputs) {
      if (v.requires_grad()) {
        n->requires_grad = true;
        break;
      }
    }
  }
  if (n->requires_grad) {
    n->inputs.reserve(inputs.size());
    for (auto& v : inputs) n->inputs.push_back(v.ptr());
    n->backward = std::move(backward_fn);
  }
  return Var(std::move(n));
}

void backward(const Var& root) {
  if (root.value().size() != 1) throw ContractError("backward: root must be a scalar");
  if (!root.requires_grad()) return;
  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node(), 0}};
  visited.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root.node()->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->has_grad()) n->backward(*n);
  }
  // Release intermediate gradients; leaves keep theirs.
  for (Node* n : order) {
    if (n->backward) n->grad.resize(0, 0);
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw ContractError("matmul: inner dimensions differ");
  Matrix out = a.value() * b.value();
  return make_op(std::move(out), {a, b}, [](Node& self) {
    Node& x = in(self, 0);
    Node& y = in(self, 1);
    if (x.requires_grad) x.accumulate(self.grad * y.value.transpose());
    if (y.requires_grad) y.accumulate(x.value.transpose() * self.grad);
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  if (a.cols() != b.cols()) throw ContractError("matmul_nt: inner dimensions differ");
  Matrix out = a.value() * b.value().transpose();
  return make_op(std::move(out), {a, b}, [](Node& self) {
    Node& x = in(self, 0);
    Node& y = in(self, 1);
    if (x.requires_grad) x.accumulate(self.grad * y.value);
    if (y.requires_grad) y.accumulate(self.grad.transpose() * x.value);
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return make_op(a.value() + b.value(), {a, b}, [](Node& self) {
    in(self, 0).accumulate(self.grad);
    in(self, 1).accumulate(self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  return make_op(a.value() - b.value(), {a, b}, [](Node& self) {
    in(self, 0).accumulate(self.grad);
    if (in(self, 1).requires_grad) in(self, 1).accumulate(-self.grad);
  });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ContractError("add_row: bad row shape");
  Matrix out = a.value().rowwise() + row.value().row(0);
  return make_op(std::move(out), {a, row}, [](Node& self) {
    in(self, 0).accumulate(self.grad);
    if (in(self, 1).requires_grad) in(self, 1).accumulate(self.grad.colwise().sum());
  });
}

Var scale(const Var& a, double s) {
  return make_op(a.value() * s, {a}, [s](Node& self) { in(self, 0).accumulate(self.grad * s); });
}

Var scale_by(const Var& a, const Var& s) {
  if (s.value().size() != 1) throw ContractError("scale_by: scalar expected");
  const double k = s.value()(0, 0);
  return make_op(a.value() * k, {a, s}, [k](Node& self) {
    Node& x = in(self, 0);
    Node& f = in(self, 1);
    if (x.requires_grad) x.accumulate(self.grad * k);
    if (f.requires_grad) f.accumulate(Matrix::Constant(1, 1, self.grad.cwiseProduct(x.value).sum()));
  });
}

Var hadamard(const Var& a, const Var& b) {
  require_same_shape(a, b, "hadamard");
  return make_op(a.value().cwiseProduct(b.value()), {a, b}, [](Node& self) {
    Node& x = in(self, 0);
    Node& y = in(self, 1);
    if (x.requires_grad) x.accumulate(self.grad.cwiseProduct(y.value));
    if (y.requires_grad) y.accumulate(self.grad.cwiseProduct(x.value));
  });
}

Var gelu(const Var& a) {
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x.data()[i];
    out.data()[i] = 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 * 0.5));
  }
  return make_op(std::move(out), {a}, [](Node& self) {
    const Matrix& x = in(self, 0).value;
    Matrix d(x.rows(), x.cols());
    const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double v = x.data()[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 * 0.5));
      d.data()[i] = self.grad.data()[i] * (cdf + v * inv_sqrt_2pi * std::exp(-0.5 * v * v));
    }
    in(self, 0).accumulate(d);
  });
}

Var sigmoid(const Var& a) {
  Matrix out = a.value().unaryExpr([](double v) {
    return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  });
  return make_op(out, {a}, [out](Node& self) {
    in(self, 0).accumulate(
        self.grad.cwiseProduct(out.cwiseProduct((1.0 - out.array()).matrix())));
  });
}

Var softmax_rows(const Var& a, bool causal) {
  const Matrix& x = a.value();
  Matrix out = Matrix::Zero(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Eigen::Index n = causal ? std::min<Eigen::Index>(r + 1, x.cols()) : x.cols();
    const double mx = x.row(r).head(n).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index c = 0; c < n; ++c) {
      const double e = std::exp(x(r, c) - mx);
      out(r, c) = e;
      sum += e;
    }
    out.row(r).head(n) /= sum;
  }
  return make_op(out, {a}, [out](Node& self) {
    // dx = y * (g - rowsum(g * y))
    const Eigen::VectorXd dots = self.grad.cwiseProduct(out).rowwise().sum();
    Matrix d = out.cwiseProduct((self.grad.colwise() - dots));
    in(self, 0).accumulate(d);
  });
}

Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Matrix& v = x.value();
  const Eigen::Index n = v.cols();
  if (gamma.rows() != 1 || gamma.cols() != n || beta.rows() != 1 || beta.cols() != n) {
    throw ContractError("layer_norm_rows: parameter shape mismatch");
  }
  const Eigen::VectorXd mean = v.rowwise().mean();
  Matrix centered = v.colwise() - mean;
  const Eigen::VectorXd inv_std =
      ((centered.array().square().rowwise().sum() / static_cast<double>(n)) + eps).rsqrt();
  Matrix xhat = centered.array().colwise() * inv_std.array();
  Matrix out = (xhat.array().rowwise() * gamma.value().row(0).array()).matrix();
  out.rowwise() += beta.value().row(0);
  return make_op(std::move(out), {x, gamma, beta}, [xhat, inv_std, n](Node& self) {
    Node& nx = in(self, 0);
    Node& ng = in(self, 1);
    Node& nb = in(self, 2);
    if (ng.requires_grad) ng.accumulate(self.grad.cwiseProduct(xhat).colwise().sum());
    if (nb.requires_grad) nb.accumulate(self.grad.colwise().sum());
    if (nx.requires_grad) {
      const Matrix gx = self.grad.array().rowwise() * ng.value.row(0).array();
      const Eigen::VectorXd mean_g = gx.rowwise().mean();
      const Eigen::VectorXd mean_gx = gx.cwiseProduct(xhat).rowwise().mean();
      Matrix d = gx.colwise() - mean_g;
      d -= (xhat.array().colwise() * mean_gx.array()).matrix();
      d = d.array().colwise() * inv_std.array();
      nx.accumulate(d);
    }
    (void)n;
  });
}

Var l2_normalize_rows(const Var& x) {
  const Eigen::VectorXd norms = x.value().rowwise().norm().cwiseMax(1e-12);
  Matrix out = x.value().array().colwise() / norms.array();
  return make_op(out, {x}, [out, norms](Node& self) {
    const Eigen::VectorXd dots = self.grad.cwiseProduct(out).rowwise().sum();
    Matrix d = self.grad - (out.array().colwise() * dots.array()).matrix();
    d = d.array().colwise() / norms.array();
    in(self, 0).accumulate(d);
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts.front().cols();
  for (const auto& p : parts) {
    if (p.cols() != cols) throw ContractError("concat_rows: column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return make_op(std::move(out), parts, [](Node& self) {
    Eigen::Index offset = 0;
    for (auto& child : self.inputs) {
      const Eigen::Index r = child->value.rows();
      if (child->requires_grad) child->accumulate(self.grad.middleRows(offset, r));
      offset += r;
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  Eigen::Index cols = 0;
  const Eigen::Index rows = parts.front().rows();
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ContractError("concat_cols: row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return make_op(std::move(out), parts, [](Node& self) {
    Eigen::Index offset = 0;
    for (auto& child : self.inputs) {
      const Eigen::Index c = child->value.cols();
      if (child->requires_grad) child->accumulate(self.grad.middleCols(offset, c));
      offset += c;
    }
  });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw ContractError("slice_rows: out of range");
  return make_op(a.value().middleRows(start, count), {a}, [start, count](Node& self) {
    Node& x = in(self, 0);
    Matrix d = Matrix::Zero(x.value.rows(), x.value.cols());
    d.middleRows(start, count) = self.grad;
    x.accumulate(d);
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw ContractError("slice_cols: out of range");
  return make_op(a.value().middleCols(start, count), {a}, [start, count](Node& self) {
    Node& x = in(self, 0);
    Matrix d = Matrix::Zero(x.value.rows(), x.value.cols());
    d.middleCols(start, count) = self.grad;
    x.accumulate(d);
  });
}

Var gather_rows(const Var& a, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= a.rows()) throw ContractError("gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = a.value().row(rows[i]);
  }
  return make_op(std::move(out), {a}, [rows](Node& self) {
    Node& x = in(self, 0);
    Matrix d = Matrix::Zero(x.value.rows(), x.value.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) d.row(rows[i]) += self.grad.row(static_cast<Eigen::Index>(i));
    x.accumulate(d);
  });
}

Var sum_all(const Var& a) {
  return make_op(Matrix::Constant(1, 1, a.value().sum()), {a}, [](Node& self) {
    Node& x = in(self, 0);
    x.accumulate(Matrix::Constant(x.value.rows(), x.value.cols(), self.grad(0, 0)));
  });
}

Var mean_all(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw ContractError("mean_all: empty input");
  return scale(sum_all(a), 1.0 / n);
}

Var ParameterSet::add(const std::string& path, Matrix init, bool trainable) {
  if (contains(path)) throw ConfigError("duplicate parameter '" + path + "'");
  entries_.push_back({path, leaf(std::move(init), trainable), trainable});
  return entries_.back().var;
}

const Var& ParameterSet::get(const std::string& path) const {
  for (const auto& p : entries_) {
    if (p.path == path) return p.var;
  }
  throw LookupError("no parameter '" + path + "'");
}

bool ParameterSet::contains(const std::string& path) const {
  for (const auto& p : entries_) {
    if (p.path == path) return true;
  }
  return false;
}

void ParameterSet::zero_grad() {
  for (auto& p : entries_) p.var.node()->grad.resize(0, 0);
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : entries_) n += static_cast<std::size_t>(p.var.value().size());
  return n;
}

}  // namespace sia::ad
