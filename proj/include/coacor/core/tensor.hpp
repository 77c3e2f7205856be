#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "coacor/core/error.hpp"

namespace coacor::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // non-empty iff requires_grad
  bool requires_grad = false;
};

}  // namespace detail

/// Dense row-major real array with an optional gradient buffer.
///
/// Copies share storage: a Tensor is a handle onto a graph node. Use
/// `detach()` for an independent value copy.
class Tensor {
 public:
  Tensor() = default;

  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false)
      : node_(std::make_shared<detail::Node>()) {
    for (std::size_t d : shape) {
      if (d == 0) {
        fail(ErrorKind::kDimension, "tensor dimensions must be positive, got " +
                                        shape_string(shape));
      }
    }
    if (shape_size(shape) != values.size()) {
      fail(ErrorKind::kDimension,
           "shape " + shape_string(shape) + " does not match " +
               std::to_string(values.size()) + " values");
    }
    node_->shape = std::move(shape);
    node_->value = std::move(values);
    node_->requires_grad = requires_grad;
    if (requires_grad) node_->grad.assign(node_->value.size(), 0.0);
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    std::vector<double> values(shape_size(shape), 0.0);
    return Tensor(std::move(shape), std::move(values), requires_grad);
  }
  static Tensor scalar(double v) { return Tensor({}, {v}); }
  static Tensor vector(std::vector<double> v, bool requires_grad = false) {
    Shape shape{v.size()};
    return Tensor(std::move(shape), std::move(v), requires_grad);
  }
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> v, bool requires_grad = false) {
    return Tensor({rows, cols}, std::move(v), requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t size() const { return node_->value.size(); }

  std::span<const double> values() const { return node_->value; }
  std::span<double> mutable_values() { return node_->value; }
  double operator[](std::size_t i) const { return node_->value[i]; }
  double at(std::size_t row, std::size_t col) const {
    return node_->value[row * node_->shape[1] + col];
  }
  double item() const {
    if (size() != 1) {
      fail(ErrorKind::kArgument,
           "item() on non-scalar tensor " + shape_string(shape()));
    }
    return node_->value[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->grad; }
  void zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

  Tensor detach() const { return Tensor(shape(), node_->value); }

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& handle() const { return node_; }

  /// Wraps a freshly computed node. Used by op implementations.
  static Tensor from_node(std::shared_ptr<detail::Node> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Ordered record of differentiable operations on one thread.
///
/// Constructing a Tape makes it the active recorder for the current thread
/// until it is destroyed. Operations whose inputs require gradients are
/// appended in execution order, so inputs always precede their consumers and
/// a reverse sweep applies the chain rule exactly. With no active tape,
/// operations only compute values.
class Tape {
 public:
  Tape() : previous_(current()) { current() = this; }
  ~Tape() { current() = previous_; }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active() { return current(); }

  void record(std::shared_ptr<detail::Node> output,
              std::function<void()> backward) {
    ops_.push_back({std::move(output), std::move(backward)});
  }

  std::size_t size() const { return ops_.size(); }

  /// Accumulates d(loss)/d(leaf) into every reachable leaf gradient.
  /// Leaf gradients are not reset; callers zero them per step.
  void backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1) {
      fail(ErrorKind::kArgument,
           "backward() requires a scalar loss, got " +
               (loss.defined() ? shape_string(loss.shape()) : "undefined"));
    }
    if (!loss.requires_grad()) return;
    if (ops_.empty()) fail(ErrorKind::kArgument, "backward() on empty tape");
    for (auto& op : ops_) {
      std::fill(op.output->grad.begin(), op.output->grad.end(), 0.0);
    }
    loss.node()->grad[0] += 1.0;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) it->backward();
  }

 private:
  friend class NoGrad;

  struct Op {
    std::shared_ptr<detail::Node> output;
    std::function<void()> backward;
  };

  static Tape*& current() {
    thread_local Tape* tape = nullptr;
    return tape;
  }

  std::vector<Op> ops_;
  Tape* previous_;
};

/// Scoped suspension of recording (evaluation-only regions).
class NoGrad {
 public:
  NoGrad() : saved_(Tape::current()) { Tape::current() = nullptr; }
  ~NoGrad() { Tape::current() = saved_; }
  NoGrad(const NoGrad&) = delete;
  NoGrad& operator=(const NoGrad&) = delete;

 private:
  Tape* saved_;
};

namespace detail {

inline bool recording(std::initializer_list<const Tensor*> inputs) {
  if (Tape::active() == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

inline std::shared_ptr<Node> make_output(Shape shape, std::vector<double> value,
                                         bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  if (requires_grad) node->grad.assign(node->value.size(), 0.0);
  return node;
}

inline void require_same_shape(const Tensor& a, const Tensor& b,
                               const char* op) {
  if (a.shape() != b.shape()) {
    fail(ErrorKind::kDimension, std::string(op) + ": shape mismatch " +
                                    shape_string(a.shape()) + " vs " +
                                    shape_string(b.shape()));
  }
}

inline void require_rank(const Tensor& a, std::size_t rank, const char* op) {
  if (a.rank() != rank) {
    fail(ErrorKind::kDimension, std::string(op) + ": expected rank " +
                                    std::to_string(rank) + ", got " +
                                    shape_string(a.shape()));
  }
}

inline double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Unary pointwise op whose derivative is expressed through the output value.
template <typename Forward, typename DerivFromOutput>
Tensor unary(const Tensor& a, Forward fwd, DerivFromOutput deriv) {
  std::vector<double> out(a.size());
  auto in = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(in[i]);
  const bool rec = recording({&a});
  auto node = make_output(a.shape(), std::move(out), rec);
  if (rec) {
    auto an = a.handle();
    Node* o = node.get();
    Tape::active()->record(node, [an, o, deriv] {
      for (std::size_t i = 0; i < o->value.size(); ++i) {
        an->grad[i] += o->grad[i] * deriv(an->value[i], o->value[i]);
      }
    });
  }
  return Tensor::from_node(std::move(node));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

/// C = A·B for A[m×k], B[k×n].
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  detail::require_rank(a, 2, "matmul");
  detail::require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    fail(ErrorKind::kDimension, "matmul: inner dimensions disagree for " +
                                    shape_string(a.shape()) + " and " +
                                    shape_string(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * bv[p * n + j];
    }
  }
  const bool rec = detail::recording({&a, &b});
  auto node = detail::make_output({m, n}, std::move(out), rec);
  if (rec) {
    auto an = a.handle(), bn = b.handle();
    detail::Node* o = node.get();
    Tape::active()->record(node, [an, bn, o, m, k, n] {
      if (an->requires_grad) {  // dA = dC·Bᵀ
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j)
              acc += o->grad[i * n + j] * bn->value[p * n + j];
            an->grad[i * k + p] += acc;
          }
      }
      if (bn->requires_grad) {  // dB = Aᵀ·dC
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double aip = an->value[i * k + p];
            for (std::size_t j = 0; j < n; ++j)
              bn->grad[p * n + j] += aip * o->grad[i * n + j];
          }
      }
    });
  }
  return Tensor::from_node(std::move(node));
}

/// y = A·x for A[m×k], x[k].
inline Tensor matvec(const Tensor& a, const Tensor& x) {
  detail::require_rank(a, 2, "matvec");
  detail::require_rank(x, 1, "matvec");
  const std::size_t m = a.dim(0), k = a.dim(1);
  if (x.dim(0) != k) {
    fail(ErrorKind::kDimension, "matvec: dimension mismatch " +
                                    shape_string(a.shape()) + " and " +
                                    shape_string(x.shape()));
  }
  std::vector<double> out(m);
  auto av = a.values();
  auto xv = x.values();
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = av.data() + i * k;
    double acc = 0.0;
    for (std::size_t p = 0; p < k; ++p) acc += row[p] * xv[p];
    out[i] = acc;
  }
  const bool rec = detail::recording({&a, &x});
  auto node = detail::make_output({m}, std::move(out), rec);
  if (rec) {
    auto an = a.handle(), xn = x.handle();
    detail::Node* o = node.get();
    Tape::active()->record(node, [an, xn, o, m, k] {
      for (std::size_t i = 0; i < m; ++i) {
        const double g = o->grad[i];
        if (g == 0.0) continue;
        if (an->requires_grad) {
          double* grow = an->grad.data() + i * k;
          for (std::size_t p = 0; p < k; ++p) grow[p] += g * xn->value[p];
        }
        if (xn->requires_grad) {
          const double* row = an->value.data() + i * k;
          for (std::size_t p = 0; p < k; ++p) xn->grad[p] += g * row[p];
        }
      }
    });
  }
  return Tensor::from_node(std::move(node));
}

/// y = Aᵀ·w for A[m×k], w[m]; the weighted sum of A's rows.
inline Tensor matvec_transposed(const Tensor& a, const Tensor& w) {
  detail::require_rank(a, 2, "matvec_transposed");
  detail::require_rank(w, 1, "matvec_transposed");
  const std::size_t m = a.dim(0), k = a.dim(1);
  if (w.dim(0) != m) {
    fail(ErrorKind::kDimension, "matvec_transposed: dimension mismatch " +
                                    shape_string(a.shape()) + " and " +
                                    shape_string(w.shape()));
  }
  std::vector<double> out(k, 0.0);
  auto av = a.values();
  auto wv = w.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) out[p] += wv[i] * av[i * k + p];
  const bool rec = detail::recording({&a, &w});
  auto node = detail::make_output({k}, std::move(out), rec);
  if (rec) {
    auto an = a.handle(), wn = w.handle();
    detail::Node* o = node.get();
    Tape::active()->record(node, [an, wn, o, m, k] {
      for (std::size_t i = 0; i < m; ++i) {
        if (an->requires_grad) {
          for (std::size_t p = 0; p < k; ++p)
            an->grad[i * k + p] += wn->value[i] * o->grad[p];
        }
        if (wn->requires_grad) {
          double acc = 0.0;
          for (std::size_t p = 0; p < k; ++p)
            acc += an->value[i * k + p] * o->grad[p];
          wn->grad[i] += acc;
        }
      }
    });
  }
  return Tensor::from_node(std::move(node));
}

// ---------------------------------------------------------------------------
// Pointwise
// ---------------------------------------------------------------------------

namespace detail {

template <typename Combine, typename GradA, typename GradB>
Tensor binary(const Tensor& a, const Tensor& b, const char* name,
              Combine combine, GradA grad_a, GradB grad_b) {
  require_same_shape(a, b, name);
  std::vector<double> out(a.size());
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = combine(av[i], bv[i]);
  const bool rec = recording({&a, &b});
  auto node = make_output(a.shape(), std::move(out), rec);
  if (rec) {
    auto an = a.handle(), bn = b.handle();
    Node* o = node.get();
    Tape::active()->record(node, [an, bn, o, grad_a, grad_b] {
      const std::size_t n = o->value.size();
      if (an->requires_grad)
        for (std::size_t i = 0; i < n; ++i)
          an->grad[i] += o->grad[i] * grad_a(an->value[i], bn->value[i]);
      if (bn->requires_grad)
        for (std::size_t i = 0; i < n; ++i)
          bn->grad[i] += o->grad[i] * grad_b(an->value[i], bn->value[i]);
    });
  }
  return Tensor::from_node(std::move(node));
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  return detail::binary(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  return detail::binary(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  return detail::binary(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

inline Tensor sigmoid(const Tensor& a) {
  return detail::unary(
      a, [](double x) { return detail::stable_sigmoid(x); },
      [](double, double y) { return y * (1.0 - y); });
}

inline Tensor tanh(const Tensor& a) {
  return detail::unary(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

inline Tensor relu(const Tensor& a) {
  return detail::unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Tensor square(const Tensor& a) {
  return detail::unary(
      a, [](double x) { return x * x; },
      [](double x, double) { return 2.0 * x; });
}

inline Tensor scale(const Tensor& a, double c) {
  return detail::unary(
      a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

inline Tensor add_constant(const Tensor& a, double c) {
  return detail::unary(
      a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

enum class Elementwise { kAdd, kSub, kMul, kSigmoid, kTanh };

/// Dispatching form of the pointwise ops; binary ops require `b`.
inline Tensor elementwise(Elementwise op, const Tensor& a,
                          const Tensor& b = Tensor()) {
  const bool binary_op =
      op == Elementwise::kAdd || op == Elementwise::kSub || op == Elementwise::kMul;
  if (binary_op && !b.defined()) {
    fail(ErrorKind::kArgument, "elementwise: binary op needs two operands");
  }
  switch (op) {
    case Elementwise::kAdd: return add(a, b);
    case Elementwise::kSub: return sub(a, b);
    case Elementwise::kMul: return mul(a, b);
    case Elementwise::kSigmoid: return sigmoid(a);
    case Elementwise::kTanh: return tanh(a);
  }
  return a;
}

/// Explicit bias add over the leading dimension: A[m×n] + b[n], or a[n] + b[n].
inline Tensor add_bias(const Tensor& a, const Tensor& bias) {
  detail::require_rank(bias, 1, "add_bias");
  if (a.rank() == 1) return add(a, bias);
  detail::require_rank(a, 2, "add_bias");
  const std::size_t m = a.dim(0), n = a.dim(1);
  if (bias.dim(0) != n) {
    fail(ErrorKind::kDimension, "add_bias: " + shape_string(a.shape()) +
                                    " vs bias " + shape_string(bias.shape()));
  }
  std::vector<double> out(a.values().begin(), a.values().end());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bias[j];
  const bool rec = detail::recording({&a, &bias});
  auto node = detail::make_output(a.shape(), std::move(out), rec);
  if (rec) {
    auto an = a.handle(), bn = bias.handle();
    detail::Node* o = node.get();
    Tape::active()->record(node, [an, bn, o, m, n] {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double g = o->grad[i * n + j];
          if (an->requires_grad) an->grad[i * n + j] += g;
          if (bn->requires_grad) bn->grad[j] += g;
        }
    });
  }
  return Tensor::from_node(std::move(node));
}

// ---------------------------------------------------------------------------
// Reductions and structure
// ---------------------------------------------------------------------------

inline Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  const bool rec = detail::recording({&a});
  auto node = detail::make_output({}, {total}, rec);
  if (rec) {
    auto an = a.handle();
    detail::Node* o = node.get();
    Tape::active()->record(node, [an, o] {
      for (double& g : an->grad) g += o->grad[0];
    });
  }
  return Tensor::from_node(std::move(node));
}

inline Tensor mean(const Tensor& a) {
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

inline Tensor dot(const Tensor& a, const Tensor& b) { return sum(mul(a, b)); }

/// Sums a list of scalars (or equal-shape tensors) in order.
inline Tensor sum_all(const std::vector<Tensor>& terms) {
  if (terms.empty()) fail(ErrorKind::kArgument, "sum_all of empty list");
  Tensor total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
  return total;
}

/// Concatenates 1-D tensors.
inline Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) fail(ErrorKind::kArgument, "concat of empty list");
  std::vector<double> out;
  bool rec = false;
  for (const Tensor& p : parts) {
    detail::require_rank(p, 1, "concat");
    out.insert(out.end(), p.values().begin(), p.values().end());
    rec = rec || detail::recording({&p});
  }
  Shape shape{out.size()};
  auto node = detail::make_output(std::move(shape), std::move(out), rec);
  if (rec) {
    std::vector<std::shared_ptr<detail::Node>> ins;
    for (const Tensor& p : parts) ins.push_back(p.handle());
    detail::Node* o = node.get();
    Tape::active()->record(node, [ins, o] {
      std::size_t offset = 0;
      for (const auto& in : ins) {
        if (in->requires_grad)
          for (std::size_t i = 0; i < in->value.size(); ++i)
            in->grad[i] += o->grad[offset + i];
        offset += in->value.size();
      }
    });
  }
  return Tensor::from_node(std::move(node));
}

/// Contiguous slice [offset, offset+length) of a 1-D tensor.
inline Tensor slice(const Tensor& a, std::size_t offset, std::size_t length) {
  detail::require_rank(a, 1, "slice");
  if (length == 0 || offset + length > a.size()) {
    fail(ErrorKind::kDimension, "slice out of range for " +
                                    shape_string(a.shape()));
  }
  std::vector<double> out(a.values().begin() + offset,
                          a.values().begin() + offset + length);
  const bool rec = detail::recording({&a});
  auto node = detail::make_output({length}, std::move(out), rec);
  if (rec) {
    auto an = a.handle();
    detail::Node* o = node.get();
    Tape::active()->record(node, [an, o, offset, length] {
      for (std::size_t i = 0; i < length; ++i)
        an->grad[offset + i] += o->grad[i];
    });
  }
  return Tensor::from_node(std::move(node));
}

/// Row `index` of a [V×d] table.
inline Tensor embedding(const Tensor& table, std::size_t index) {
  detail::require_rank(table, 2, "embedding");
  const std::size_t rows = table.dim(0), d = table.dim(1);
  if (index >= rows) {
    fail(ErrorKind::kArgument, "embedding: index " + std::to_string(index) +
                                   " out of range for " +
                                   shape_string(table.shape()));
  }
  std::vector<double> out(table.values().begin() + index * d,
                          table.values().begin() + (index + 1) * d);
  const bool rec = detail::recording({&table});
  auto node = detail::make_output({d}, std::move(out), rec);
  if (rec) {
    auto tn = table.handle();
    detail::Node* o = node.get();
    Tape::active()->record(node, [tn, o, index, d] {
      for (std::size_t i = 0; i < d; ++i) tn->grad[index * d + i] += o->grad[i];
    });
  }
  return Tensor::from_node(std::move(node));
}

/// Stacks equal-length 1-D tensors into a [T×d] matrix.
inline Tensor stack(const std::vector<Tensor>& rows) {
  if (rows.empty()) fail(ErrorKind::kArgument, "stack of empty list");
  const std::size_t d = rows.front().size();
  std::vector<double> out;
  out.reserve(rows.size() * d);
  bool rec = false;
  for (const Tensor& r : rows) {
    detail::require_rank(r, 1, "stack");
    if (r.size() != d) {
      fail(ErrorKind::kDimension, "stack: rows of unequal length");
    }
    out.insert(out.end(), r.values().begin(), r.values().end());
    rec = rec || detail::recording({&r});
  }
  auto node = detail::make_output({rows.size(), d}, std::move(out), rec);
  if (rec) {
    std::vector<std::shared_ptr<detail::Node>> ins;
    for (const Tensor& r : rows) ins.push_back(r.handle());
    detail::Node* o = node.get();
    Tape::active()->record(node, [ins, o, d] {
      for (std::size_t t = 0; t < ins.size(); ++t)
        if (ins[t]->requires_grad)
          for (std::size_t i = 0; i < d; ++i)
            ins[t]->grad[i] += o->grad[t * d + i];
    });
  }
  return Tensor::from_node(std::move(node));
}

/// Per-column maximum of h[T×d]. Gradient goes to the first maximal row.
inline Tensor max_over_time(const Tensor& h) {
  detail::require_rank(h, 2, "max_over_time");
  const std::size_t steps = h.dim(0), d = h.dim(1);
  std::vector<double> out(d);
  std::vector<std::size_t> argmax(d, 0);
  for (std::size_t j = 0; j < d; ++j) {
    double best = h.at(0, j);
    for (std::size_t t = 1; t < steps; ++t) {
      if (h.at(t, j) > best) {
        best = h.at(t, j);
        argmax[j] = t;
      }
    }
    out[j] = best;
  }
  const bool rec = detail::recording({&h});
  auto node = detail::make_output({d}, std::move(out), rec);
  if (rec) {
    auto hn = h.handle();
    detail::Node* o = node.get();
    Tape::active()->record(node, [hn, o, argmax = std::move(argmax), d] {
      for (std::size_t j = 0; j < d; ++j) hn->grad[argmax[j] * d + j] += o->grad[j];
    });
  }
  return Tensor::from_node(std::move(node));
}

// ---------------------------------------------------------------------------
// Normalizers and similarity
// ---------------------------------------------------------------------------

inline Tensor softmax(const Tensor& logits) {
  detail::require_rank(logits, 1, "softmax");
  auto x = logits.values();
  const double top = *std::max_element(x.begin(), x.end());
  std::vector<double> out(x.size());
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - top);
    z += out[i];
  }
  for (double& v : out) v /= z;
  const bool rec = detail::recording({&logits});
  auto node = detail::make_output(logits.shape(), std::move(out), rec);
  if (rec) {
    auto ln = logits.handle();
    detail::Node* o = node.get();
    Tape::active()->record(node, [ln, o] {
      double inner = 0.0;
      for (std::size_t i = 0; i < o->value.size(); ++i)
        inner += o->grad[i] * o->value[i];
      for (std::size_t i = 0; i < o->value.size(); ++i)
        ln->grad[i] += o->value[i] * (o->grad[i] - inner);
    });
  }
  return Tensor::from_node(std::move(node));
}

/// Log-softmax over the entries not excluded by `masked` (1 = excluded).
/// Excluded entries come out as -inf and receive no gradient.
inline Tensor log_softmax(const Tensor& logits,
                          const std::vector<unsigned char>& masked = {}) {
  detail::require_rank(logits, 1, "log_softmax");
  const std::size_t n = logits.size();
  auto excluded = [&masked](std::size_t i) {
    return !masked.empty() && masked[i] != 0;
  };
  if (!masked.empty() && masked.size() != n) {
    fail(ErrorKind::kDimension, "log_softmax: mask length mismatch");
  }
  auto x = logits.values();
  double top = -INFINITY;
  for (std::size_t i = 0; i < n; ++i)
    if (!excluded(i)) top = std::max(top, x[i]);
  if (top == -INFINITY) fail(ErrorKind::kArgument, "log_softmax: all entries masked");
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (!excluded(i)) z += std::exp(x[i] - top);
  const double lse = top + std::log(z);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = excluded(i) ? -INFINITY : x[i] - lse;
  const bool rec = detail::recording({&logits});
  auto node = detail::make_output(logits.shape(), std::move(out), rec);
  if (rec) {
    auto ln = logits.handle();
    detail::Node* o = node.get();
    Tape::active()->record(node, [ln, o, masked, n] {
      auto excl = [&masked](std::size_t i) {
        return !masked.empty() && masked[i] != 0;
      };
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        if (!excl(i)) total += o->grad[i];
      for (std::size_t i = 0; i < n; ++i)
        if (!excl(i)) ln->grad[i] += o->grad[i] - std::exp(o->value[i]) * total;
    });
  }
  return Tensor::from_node(std::move(node));
}

/// Element `index` of a 1-D tensor as a scalar.
inline Tensor pick(const Tensor& a, std::size_t index) {
  detail::require_rank(a, 1, "pick");
  if (index >= a.size()) fail(ErrorKind::kArgument, "pick: index out of range");
  const bool rec = detail::recording({&a});
  auto node = detail::make_output({}, {a[index]}, rec);
  if (rec) {
    auto an = a.handle();
    detail::Node* o = node.get();
    Tape::active()->record(node, [an, o, index] { an->grad[index] += o->grad[0]; });
  }
  return Tensor::from_node(std::move(node));
}

/// Count of zero-norm inputs seen by cosine() on this thread.
inline std::size_t& degenerate_cosine_count() {
  thread_local std::size_t count = 0;
  return count;
}

/// aᵀb / (‖a‖‖b‖) as a scalar tensor. A zero-norm operand yields 0 with no
/// gradient and bumps degenerate_cosine_count().
inline Tensor cosine(const Tensor& a, const Tensor& b, bool* degenerate = nullptr) {
  detail::require_rank(a, 1, "cosine");
  detail::require_same_shape(a, b, "cosine");
  auto av = a.values();
  auto bv = b.values();
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    ab += av[i] * bv[i];
    aa += av[i] * av[i];
    bb += bv[i] * bv[i];
  }
  const double na = std::sqrt(aa), nb = std::sqrt(bb);
  const bool zero = na == 0.0 || nb == 0.0;
  if (degenerate) *degenerate = zero;
  if (zero) {
    ++degenerate_cosine_count();
    return Tensor::scalar(0.0);
  }
  const double c = std::clamp(ab / (na * nb), -1.0, 1.0);
  const bool rec = detail::recording({&a, &b});
  auto node = detail::make_output({}, {c}, rec);
  if (rec) {
    auto an = a.handle(), bn = b.handle();
    detail::Node* o = node.get();
    const double raw = ab / (na * nb);
    Tape::active()->record(node, [an, bn, o, na, nb, raw] {
      const double g = o->grad[0];
      const std::size_t n = an->value.size();
      if (an->requires_grad)
        for (std::size_t i = 0; i < n; ++i)
          an->grad[i] += g * (bn->value[i] / (na * nb) -
                              raw * an->value[i] / (na * na));
      if (bn->requires_grad)
        for (std::size_t i = 0; i < n; ++i)
          bn->grad[i] += g * (an->value[i] / (na * nb) -
                              raw * bn->value[i] / (nb * nb));
    });
  }
  return Tensor::from_node(std::move(node));
}

/// Inverted dropout with an explicit keep mask (1/(1-rate) scaling).
inline Tensor apply_mask(const Tensor& a, const std::vector<double>& mask) {
  if (mask.size() != a.size()) fail(ErrorKind::kDimension, "dropout mask size");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * mask[i];
  const bool rec = detail::recording({&a});
  auto node = detail::make_output(a.shape(), std::move(out), rec);
  if (rec) {
    auto an = a.handle();
    detail::Node* o = node.get();
    Tape::active()->record(node, [an, o, mask] {
      for (std::size_t i = 0; i < mask.size(); ++i) an->grad[i] += o->grad[i] * mask[i];
    });
  }
  return Tensor::from_node(std::move(node));
}

}  // namespace coacor::ad
