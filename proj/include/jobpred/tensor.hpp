#pragma once

// Dense double-precision tensors with reverse-mode gradient accumulation.
//
// A Tensor is a shared handle onto a graph node. Ops record their parents and
// a backward closure only when some input requires a gradient and grad mode
// is enabled, so inference builds no graph at all.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "jobpred/error.hpp"

namespace jobpred {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // same length as values iff requires_grad
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;  // empty for leaves

  bool is_leaf() const { return !backward; }
};

inline thread_local bool grad_enabled = true;

}  // namespace detail

/// RAII scope that disables graph recording on this thread.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_enabled) { detail::grad_enabled = false; }
  ~NoGradGuard() { detail::grad_enabled = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

class Tensor {
 public:
  Tensor() = default;

  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false)
      : node_(std::make_shared<detail::Node>()) {
    for (std::size_t d : shape) {
      if (d == 0) throw ShapeError("zero-sized dimension in " + shape_str(shape));
    }
    if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
    if (shape_numel(shape) != values.size()) {
      throw ShapeError("shape " + shape_str(shape) + " does not match " +
                       std::to_string(values.size()) + " values");
    }
    node_->shape = std::move(shape);
    node_->values = std::move(values);
    set_requires_grad(requires_grad);
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
  }
  static Tensor full(Shape shape, double value, bool requires_grad = false) {
    std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
  }
  static Tensor scalar(double value, bool requires_grad = false) {
    return Tensor({1}, {value}, requires_grad);
  }
  static Tensor vector(std::vector<double> values, bool requires_grad = false) {
    Shape s{values.size()};
    return Tensor(std::move(s), std::move(values), requires_grad);
  }
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false) {
    return Tensor({rows, cols}, std::move(values), requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t size() const { return node_->values.size(); }

  std::span<const double> values() const { return node_->values; }
  std::span<double> mutable_values() { return node_->values; }
  double operator[](std::size_t i) const { return node_->values[i]; }
  double at(std::size_t row, std::size_t col) const {
    return node_->values[row * node_->shape.back() + col];
  }
  double item() const {
    if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return node_->values[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag) {
    node_->requires_grad = flag;
    if (flag && node_->grad.size() != node_->values.size()) {
      node_->grad.assign(node_->values.size(), 0.0);
    } else if (!flag) {
      node_->grad.clear();
    }
  }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->grad; }
  void zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

  /// Independent leaf holding a copy of the values.
  Tensor detach() const { return Tensor(shape(), node_->values, false); }
  Tensor clone(bool requires_grad) const { return Tensor(shape(), node_->values, requires_grad); }

  /// Seeds d(this)/d(this) = 1 and propagates into every reachable leaf that
  /// requires a gradient. Leaf gradients accumulate across calls; interior
  /// buffers are reset at the start of every pass.
  void backward() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

namespace detail {

/// Creates an op result. Parents and the backward closure are kept only when
/// grad mode is on and some parent requires a gradient.
inline Tensor make_result(Shape shape, std::vector<double> values,
                          std::initializer_list<const Tensor*> parents,
                          std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  bool needs = false;
  if (grad_enabled) {
    for (const Tensor* p : parents) needs = needs || p->requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->grad.assign(node->values.size(), 0.0);
    for (const Tensor* p : parents) node->parents.push_back(p->node());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

inline Tensor make_result(Shape shape, std::vector<double> values,
                          const std::vector<Tensor>& parents,
                          std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  bool needs = false;
  if (grad_enabled) {
    for (const Tensor& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->grad.assign(node->values.size(), 0.0);
    for (const Tensor& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

/// Gradient buffer of parent i, or nullptr when that parent needs none.
inline double* parent_grad(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  return p.requires_grad ? p.grad.data() : nullptr;
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " differ");
  }
}

}  // namespace detail

inline void Tensor::backward() const {
  if (size() != 1) throw ShapeError("backward() needs a scalar, got " + shape_str(shape()));
  if (!requires_grad()) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  for (detail::Node* n : order) {
    if (!n->is_leaf()) std::fill(n->grad.begin(), n->grad.end(), 0.0);
  }
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (!(*it)->is_leaf()) (*it)->backward(**it);
  }
}

// ---------------------------------------------------------------------------
// Linear algebra

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  const double* A = a.values().data();
  const double* B = b.values().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      const double* brow = B + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
    }
  }
  return detail::make_result({m, n}, std::move(out), {&a, &b}, [m, k, n](detail::Node& self) {
    const double* G = self.grad.data();
    const double* A = self.parents[0]->values.data();
    const double* B = self.parents[1]->values.data();
    if (double* gA = detail::parent_grad(self, 0)) {
      // dA = G * B^T
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += G[i * n + j] * B[p * n + j];
          gA[i * k + p] += acc;
        }
    }
    if (double* gB = detail::parent_grad(self, 1)) {
      // dB = A^T * G
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = A[i * k + p];
          for (std::size_t j = 0; j < n; ++j) gB[p * n + j] += aip * G[i * n + j];
        }
    }
  });
}

inline Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.size()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  std::vector<double> v(x.values().begin(), x.values().end());
  return detail::make_result(std::move(shape), std::move(v), {&x}, [](detail::Node& self) {
    if (double* g = detail::parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

// ---------------------------------------------------------------------------
// Elementwise

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return detail::make_result(a.shape(), std::move(out), {&a, &b}, [](detail::Node& self) {
    for (std::size_t p = 0; p < 2; ++p)
      if (double* g = detail::parent_grad(self, p))
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return detail::make_result(a.shape(), std::move(out), {&a, &b}, [](detail::Node& self) {
    if (double* g = detail::parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    if (double* g = detail::parent_grad(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
  });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return detail::make_result(a.shape(), std::move(out), {&a, &b}, [](detail::Node& self) {
    const auto& av = self.parents[0]->values;
    const auto& bv = self.parents[1]->values;
    if (double* g = detail::parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * bv[i];
    if (double* g = detail::parent_grad(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * av[i];
  });
}

inline Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
  return detail::make_result(x.shape(), std::move(out), {&x}, [factor](detail::Node& self) {
    if (double* g = detail::parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

/// 1 - x, used by the GRU interpolation.
inline Tensor one_minus(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 - x[i];
  return detail::make_result(x.shape(), std::move(out), {&x}, [](detail::Node& self) {
    if (double* g = detail::parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
  });
}

inline double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace detail {

// Unary op whose local derivative is a function of the output only.
template <typename Forward, typename DerivFromOutput>
Tensor unary_from_output(const Tensor& x, Forward f, DerivFromOutput df) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i]);
  return make_result(x.shape(), std::move(out), {&x}, [df](Node& self) {
    if (double* g = parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * df(self.values[i]);
  });
}

}  // namespace detail

inline Tensor sigmoid(const Tensor& x) {
  return detail::unary_from_output(x, sigmoid_scalar, [](double y) { return y * (1.0 - y); });
}

inline Tensor tanh(const Tensor& x) {
  return detail::unary_from_output(
      x, [](double v) { return std::tanh(v); }, [](double y) { return 1.0 - y * y; });
}

inline Tensor relu(const Tensor& x) {
  // y > 0 exactly when x > 0
  return detail::unary_from_output(
      x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double y) { return y > 0.0 ? 1.0 : 0.0; });
}

enum class ElementwiseOp { add, mul, sigmoid, tanh, relu };

/// Dispatches one of the pointwise kernels by kind; binary kinds need two operands.
inline Tensor elementwise(ElementwiseOp op, std::span<const Tensor> operands) {
  const bool binary = op == ElementwiseOp::add || op == ElementwiseOp::mul;
  if (operands.size() != (binary ? 2u : 1u)) {
    throw ShapeError("elementwise: expected " + std::to_string(binary ? 2 : 1) + " operands, got " +
                     std::to_string(operands.size()));
  }
  switch (op) {
    case ElementwiseOp::add: return add(operands[0], operands[1]);
    case ElementwiseOp::mul: return mul(operands[0], operands[1]);
    case ElementwiseOp::sigmoid: return sigmoid(operands[0]);
    case ElementwiseOp::tanh: return tanh(operands[0]);
    case ElementwiseOp::relu: return relu(operands[0]);
  }
  throw ShapeError("elementwise: unknown op");
}

/// Adds bias[C] to every row of x[..., C] (the only broadcast supported).
inline Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (bias.rank() != 1 || x.shape().back() != bias.dim(0)) {
    throw ShapeError("add_bias: bias " + shape_str(bias.shape()) + " does not match " +
                     shape_str(x.shape()));
  }
  const std::size_t c = bias.dim(0);
  std::vector<double> out(x.values().begin(), x.values().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bias[i % c];
  return detail::make_result(x.shape(), std::move(out), {&x, &bias}, [c](detail::Node& self) {
    if (double* g = detail::parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    if (double* g = detail::parent_grad(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % c] += self.grad[i];
  });
}

inline Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  return detail::make_result({1}, {total}, {&x}, [](detail::Node& self) {
    if (double* g = detail::parent_grad(self, 0)) {
      const double up = self.grad[0];
      const std::size_t n = self.parents[0]->values.size();
      for (std::size_t i = 0; i < n; ++i) g[i] += up;
    }
  });
}

/// Concatenates along the last axis; all inputs share rank and leading dims.
inline Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  const std::size_t rows = first.size() == 1 ? 1 : shape_numel(first) / first.back();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size() || !std::equal(s.begin(), s.end() - 1, first.begin())) {
      throw ShapeError("concat: " + shape_str(s) + " incompatible with " + shape_str(first));
    }
    widths.push_back(s.back());
    total += s.back();
  }
  std::vector<double> out(rows * total);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const double* src = parts[p].values().data();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(src + r * widths[p], widths[p], out.data() + r * total + offset);
    offset += widths[p];
  }
  Shape shape = first;
  shape.back() = total;
  return detail::make_result(std::move(shape), std::move(out), parts,
                             [rows, total, widths](detail::Node& self) {
                               std::size_t off = 0;
                               for (std::size_t p = 0; p < widths.size(); ++p) {
                                 if (double* g = detail::parent_grad(self, p)) {
                                   for (std::size_t r = 0; r < rows; ++r)
                                     for (std::size_t j = 0; j < widths[p]; ++j)
                                       g[r * widths[p] + j] += self.grad[r * total + off + j];
                                 }
                                 off += widths[p];
                               }
                             });
}

// ---------------------------------------------------------------------------
// Softmax and losses

inline void softmax_row(const double* in, double* out, std::size_t n) {
  double mx = in[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, in[i]);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp(in[i] - mx);
    z += out[i];
  }
  for (std::size_t i = 0; i < n; ++i) out[i] /= z;
}

/// Softmax over the last axis (a vector, or each row of a matrix).
inline Tensor softmax(const Tensor& logits) {
  if (!logits.defined() || logits.size() == 0) throw ShapeError("softmax: empty input");
  if (logits.rank() > 2) throw ShapeError("softmax: rank > 2 " + shape_str(logits.shape()));
  const std::size_t n = logits.shape().back();
  const std::size_t rows = logits.size() / n;
  std::vector<double> out(logits.size());
  for (std::size_t r = 0; r < rows; ++r) softmax_row(logits.values().data() + r * n, out.data() + r * n, n);
  return detail::make_result(logits.shape(), std::move(out), {&logits}, [n, rows](detail::Node& self) {
    double* g = detail::parent_grad(self, 0);
    if (!g) return;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.values.data() + r * n;
      const double* dy = self.grad.data() + r * n;
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += dy[i] * y[i];
      for (std::size_t i = 0; i < n; ++i) g[r * n + i] += y[i] * (dy[i] - dot);
    }
  });
}

/// Mean over rows of -ln p[target] for rows of softmax(logits), fused so the
/// gradient is (p - onehot) / batch.
inline Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::size_t> targets) {
  if (logits.rank() > 2) throw ShapeError("softmax_cross_entropy: rank > 2");
  const std::size_t n = logits.shape().back();
  const std::size_t rows = logits.size() / n;
  if (targets.size() != rows) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(rows) + " rows");
  }
  std::vector<double> probs(logits.size());
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] >= n) {
      throw LabelError("target " + std::to_string(targets[r]) + " out of range for " +
                       std::to_string(n) + " classes");
    }
    const double* z = logits.values().data() + r * n;
    double mx = *std::max_element(z, z + n);
    double sum_exp = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum_exp += std::exp(z[i] - mx);
    loss += -(z[targets[r]] - mx - std::log(sum_exp));
    softmax_row(z, probs.data() + r * n, n);
  }
  loss /= static_cast<double>(rows);
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  return detail::make_result(
      {1}, {loss}, {&logits},
      [probs = std::move(probs), tgt = std::move(tgt), n, rows](detail::Node& self) {
        double* g = detail::parent_grad(self, 0);
        if (!g) return;
        const double up = self.grad[0] / static_cast<double>(rows);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t i = 0; i < n; ++i)
            g[r * n + i] += up * (probs[r * n + i] - (i == tgt[r] ? 1.0 : 0.0));
      });
}

/// Mean over rows of -ln p[target] given probabilities directly (value only).
inline double cross_entropy_loss(const Tensor& probabilities, std::span<const std::size_t> targets) {
  const std::size_t n = probabilities.shape().back();
  const std::size_t rows = probabilities.size() / n;
  if (targets.size() != rows) throw ShapeError("cross_entropy_loss: target count mismatch");
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* p = probabilities.values().data() + r * n;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += p[i];
    if (std::abs(s - 1.0) > 1e-6) throw NumericError("cross_entropy_loss: row does not sum to 1");
    if (targets[r] >= n) {
      throw LabelError("target " + std::to_string(targets[r]) + " out of range for " +
                       std::to_string(n) + " classes");
    }
    loss += -std::log(p[targets[r]]);
  }
  return loss / static_cast<double>(rows);
}

// ---------------------------------------------------------------------------
// Gradient verification

/// Largest |analytic - numeric| / max(1, |analytic|, |numeric|) over every
/// coordinate of every parameter. The loss closure must rebuild the graph
/// from the parameters' current values on each call.
inline double finite_difference_check(const std::function<Tensor()>& loss_fn,
                                      std::span<Tensor> params, double epsilon = 1e-5) {
  for (Tensor& p : params) {
    if (!p.requires_grad()) p.set_requires_grad(true);
    p.zero_grad();
  }
  Tensor loss = loss_fn();
  if (!std::isfinite(loss.item())) throw NumericError("finite_difference_check: non-finite f(x)");
  loss.backward();

  auto eval = [&] {
    NoGradGuard guard;
    double v = loss_fn().item();
    if (!std::isfinite(v)) throw NumericError("finite_difference_check: non-finite f(x+h)");
    return v;
  };

  double worst = 0.0;
  for (Tensor& p : params) {
    std::vector<double> analytic(p.grad().begin(), p.grad().end());
    auto vals = p.mutable_values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double saved = vals[i];
      vals[i] = saved + epsilon;
      const double up = eval();
      vals[i] = saved - epsilon;
      const double down = eval();
      vals[i] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double denom = std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
      worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
  }
  return worst;
}

inline double finite_difference_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                                      double epsilon = 1e-5) {
  std::vector<Tensor> params{x.clone(true)};
  return finite_difference_check([&] { return f(params[0]); }, params, epsilon);
}

}  // namespace jobpred
