// Copyright 2026 The busum Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dense row-major tensors with reverse-mode differentiation.
//
// A BasicTensor is a shared handle to a graph node. Operations on tensors that
// require gradients record their inputs and a backward closure; backward() on
// a scalar result walks the recorded graph in reverse topological order and
// accumulates gradients into every reachable tensor. The scalar type is a
// template parameter: models run in float, gradient verification runs the
// same code in long double.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "busum/error.hpp"
#include "busum/rng.hpp"

namespace busum {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

namespace detail {

template <class S>
struct Node {
  Shape shape;
  std::vector<S> value;
  std::vector<S> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  bool is_leaf() const { return !backward_fn; }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), S(0));
  }
};

inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace detail

// Disables graph recording in the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : prev_(detail::grad_mode()) { detail::grad_mode() = false; }
  ~NoGradGuard() { detail::grad_mode() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

template <class S>
class BasicTensor {
 public:
  using Scalar = S;
  using NodeT = detail::Node<S>;

  BasicTensor() = default;

  static BasicTensor from(Shape shape, std::vector<S> values, bool requires_grad = false) {
    if (shape_numel(shape) != values.size())
      throw Error("tensor data length " + std::to_string(values.size()) + " does not match shape " + shape_str(shape));
    auto n = std::make_shared<NodeT>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    n->requires_grad = requires_grad;
    return BasicTensor(std::move(n));
  }
  static BasicTensor zeros(Shape shape, bool requires_grad = false) {
    const auto sz = shape_numel(shape);
    return from(std::move(shape), std::vector<S>(sz, S(0)), requires_grad);
  }
  static BasicTensor full(Shape shape, S v, bool requires_grad = false) {
    const auto sz = shape_numel(shape);
    return from(std::move(shape), std::vector<S>(sz, v), requires_grad);
  }
  static BasicTensor scalar(S v, bool requires_grad = false) { return from({1}, {v}, requires_grad); }
  static BasicTensor vector(std::vector<S> v, bool requires_grad = false) {
    const std::size_t n = v.size();
    return from({n}, std::move(v), requires_grad);
  }

  explicit operator bool() const { return static_cast<bool>(node_); }

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<const S> data() const { return node_->value; }
  std::span<S> mutable_data() { return node_->value; }
  S operator[](std::size_t i) const { return node_->value[i]; }
  S item() const {
    if (numel() != 1) throw Error("item() on tensor of shape " + shape_str(shape()));
    return node_->value[0];
  }
  std::vector<S> to_vector() const { return node_->value; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  std::span<const S> grad() const { return node_->grad; }
  std::span<S> mutable_grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad() { node_->grad.assign(node_->value.size(), S(0)); }

  // Deep copy of the values as a new leaf.
  BasicTensor detach() const { return from(shape(), node_->value, false); }

  // Populates gradients of every tensor reachable from this scalar. Leaf
  // gradients accumulate across calls; intermediate gradients are reset.
  void backward() const;

  NodeT* node() const { return node_.get(); }
  const std::shared_ptr<NodeT>& handle() const { return node_; }
  explicit BasicTensor(std::shared_ptr<NodeT> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<NodeT> node_;
};

using Tensor = BasicTensor<float>;

template <class S>
void BasicTensor<S>::backward() const {
  if (!node_ || numel() != 1) throw Error("backward requires a scalar loss");
  if (!node_->requires_grad) throw Error("backward on a tensor that is not part of a gradient graph");
  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<NodeT*> order;
  std::unordered_set<NodeT*> seen;
  std::vector<std::pair<NodeT*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      NodeT* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  for (NodeT* n : order)
    if (!n->is_leaf()) n->grad.assign(n->value.size(), S(0));
  node_->ensure_grad();
  node_->grad[0] += S(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if (!(*it)->is_leaf()) (*it)->backward_fn(**it);
}

namespace detail {

template <class S>
bool any_requires_grad(std::initializer_list<const BasicTensor<S>*> inputs) {
  if (!grad_mode()) return false;
  for (auto* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

// Builds a result node; records parents and the backward closure only when
// some input participates in a gradient graph.
template <class S, class F>
BasicTensor<S> make_result(Shape shape, std::vector<S> value, std::vector<BasicTensor<S>> inputs, F&& backward) {
  auto n = std::make_shared<Node<S>>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  bool track = grad_mode() && std::any_of(inputs.begin(), inputs.end(), [](const auto& t) { return t.requires_grad(); });
  if (track) {
    n->requires_grad = true;
    n->parents.reserve(inputs.size());
    for (auto& t : inputs) n->parents.push_back(t.handle());
    n->backward_fn = std::forward<F>(backward);
  }
  return BasicTensor<S>(std::move(n));
}

// Gradient buffer of parent k if it takes gradients, else nullptr.
template <class S>
S* parent_grad(Node<S>& self, std::size_t k) {
  auto& p = *self.parents[k];
  if (!p.requires_grad) return nullptr;
  p.ensure_grad();
  return p.grad.data();
}

template <class S>
void check_same_shape(const BasicTensor<S>& a, const BasicTensor<S>& b, const char* op) {
  if (a.shape() != b.shape())
    throw Error(std::string("shape mismatch in ") + op + ": " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

template <class S>
void check_rank(const BasicTensor<S>& a, std::size_t rank, const char* op) {
  if (a.rank() != rank)
    throw Error(std::string(op) + " expects rank " + std::to_string(rank) + ", got " + shape_str(a.shape()));
}

template <class S, class F, class DF>
BasicTensor<S> unary(const BasicTensor<S>& x, F&& f, DF&& df) {
  std::vector<S> y(x.numel());
  auto xv = x.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(xv[i]);
  return make_result<S>(x.shape(), std::move(y), {x}, [df](Node<S>& self) {
    S* g = parent_grad(self, 0);
    if (!g) return;
    const auto& xv = self.parents[0]->value;
    for (std::size_t i = 0; i < self.value.size(); ++i) g[i] += self.grad[i] * df(xv[i], self.value[i]);
  });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise

template <class S>
BasicTensor<S> add(const BasicTensor<S>& a, const BasicTensor<S>& b) {
  detail::check_same_shape(a, b, "add");
  std::vector<S> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] + b[i];
  return detail::make_result<S>(a.shape(), std::move(y), {a, b}, [](detail::Node<S>& self) {
    for (std::size_t k = 0; k < 2; ++k)
      if (S* g = detail::parent_grad(self, k))
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

template <class S>
BasicTensor<S> sub(const BasicTensor<S>& a, const BasicTensor<S>& b) {
  detail::check_same_shape(a, b, "sub");
  std::vector<S> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] - b[i];
  return detail::make_result<S>(a.shape(), std::move(y), {a, b}, [](detail::Node<S>& self) {
    if (S* g = detail::parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    if (S* g = detail::parent_grad(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
  });
}

template <class S>
BasicTensor<S> mul(const BasicTensor<S>& a, const BasicTensor<S>& b) {
  detail::check_same_shape(a, b, "mul");
  std::vector<S> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] * b[i];
  return detail::make_result<S>(a.shape(), std::move(y), {a, b}, [](detail::Node<S>& self) {
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    if (S* g = detail::parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * bv[i];
    if (S* g = detail::parent_grad(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * av[i];
  });
}

template <class S>
BasicTensor<S> div(const BasicTensor<S>& a, const BasicTensor<S>& b) {
  detail::check_same_shape(a, b, "div");
  std::vector<S> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] / b[i];
  return detail::make_result<S>(a.shape(), std::move(y), {a, b}, [](detail::Node<S>& self) {
    const auto& bv = self.parents[1]->value;
    if (S* g = detail::parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] / bv[i];
    if (S* g = detail::parent_grad(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i] * self.value[i] / bv[i];
  });
}

// a * c + d for constants c, d.
template <class S>
BasicTensor<S> affine(const BasicTensor<S>& a, S c, S d) {
  return detail::unary(a, [c, d](S x) { return x * c + d; }, [c](S, S) { return c; });
}
template <class S>
BasicTensor<S> scale(const BasicTensor<S>& a, S c) { return affine(a, c, S(0)); }
template <class S>
BasicTensor<S> one_minus(const BasicTensor<S>& a) { return affine(a, S(-1), S(1)); }

// Vector times a one-element tensor.
template <class S>
BasicTensor<S> scale(const BasicTensor<S>& a, const BasicTensor<S>& s) {
  if (s.numel() != 1) throw Error("scale expects a one-element factor, got " + shape_str(s.shape()));
  const S c = s[0];
  std::vector<S> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] * c;
  return detail::make_result<S>(a.shape(), std::move(y), {a, s}, [](detail::Node<S>& self) {
    const auto& av = self.parents[0]->value;
    const S c = self.parents[1]->value[0];
    if (S* g = detail::parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * c;
    if (S* g = detail::parent_grad(self, 1)) {
      S acc = 0;
      for (std::size_t i = 0; i < self.grad.size(); ++i) acc += self.grad[i] * av[i];
      g[0] += acc;
    }
  });
}

template <class S>
S sigmoid_value(S x) {
  return x >= 0 ? S(1) / (S(1) + std::exp(-x)) : std::exp(x) / (S(1) + std::exp(x));
}

template <class S>
BasicTensor<S> sigmoid(const BasicTensor<S>& x) {
  return detail::unary(x, [](S v) { return sigmoid_value(v); }, [](S, S y) { return y * (S(1) - y); });
}
template <class S>
BasicTensor<S> tanh(const BasicTensor<S>& x) {
  return detail::unary(x, [](S v) { return std::tanh(v); }, [](S, S y) { return S(1) - y * y; });
}
template <class S>
BasicTensor<S> exp(const BasicTensor<S>& x) {
  return detail::unary(x, [](S v) { return std::exp(v); }, [](S, S y) { return y; });
}
template <class S>
BasicTensor<S> log(const BasicTensor<S>& x) {
  return detail::unary(x, [](S v) { return std::log(v); }, [](S v, S) { return S(1) / v; });
}
template <class S>
BasicTensor<S> square(const BasicTensor<S>& x) {
  return detail::unary(x, [](S v) { return v * v; }, [](S v, S) { return S(2) * v; });
}

// ---------------------------------------------------------------------------
// Reductions

template <class S>
BasicTensor<S> sum(const BasicTensor<S>& a) {
  S acc = 0;
  for (S v : a.data()) acc += v;
  return detail::make_result<S>({1}, {acc}, {a}, [](detail::Node<S>& self) {
    if (S* g = detail::parent_grad(self, 0)) {
      const std::size_t n = self.parents[0]->value.size();
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
    }
  });
}

template <class S>
BasicTensor<S> mean(const BasicTensor<S>& a) {
  return scale(sum(a), S(1) / static_cast<S>(a.numel()));
}

// Sum of a list of one-element tensors.
template <class S>
BasicTensor<S> add_all(const std::vector<BasicTensor<S>>& terms) {
  if (terms.empty()) return BasicTensor<S>::scalar(S(0));
  S acc = 0;
  for (const auto& t : terms) {
    if (t.numel() != 1) throw Error("add_all expects one-element tensors");
    acc += t[0];
  }
  return detail::make_result<S>({1}, {acc}, terms, [](detail::Node<S>& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k)
      if (S* g = detail::parent_grad(self, k)) g[0] += self.grad[0];
  });
}

template <class S>
BasicTensor<S> dot(const BasicTensor<S>& a, const BasicTensor<S>& b) {
  detail::check_same_shape(a, b, "dot");
  S acc = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += a[i] * b[i];
  return detail::make_result<S>({1}, {acc}, {a, b}, [](detail::Node<S>& self) {
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    const S go = self.grad[0];
    if (S* g = detail::parent_grad(self, 0))
      for (std::size_t i = 0; i < av.size(); ++i) g[i] += go * bv[i];
    if (S* g = detail::parent_grad(self, 1))
      for (std::size_t i = 0; i < av.size(); ++i) g[i] += go * av[i];
  });
}

// ---------------------------------------------------------------------------
// Linear algebra

// M [r, c] times v [c] -> [r].
template <class S>
BasicTensor<S> matvec(const BasicTensor<S>& m, const BasicTensor<S>& v) {
  detail::check_rank(m, 2, "matvec");
  const std::size_t r = m.dim(0), c = m.dim(1);
  if (v.numel() != c)
    throw Error("shape mismatch in matvec: " + shape_str(m.shape()) + " x " + shape_str(v.shape()));
  std::vector<S> y(r);
  const S* mv = m.data().data();
  const S* vv = v.data().data();
  for (std::size_t i = 0; i < r; ++i) {
    S acc = 0;
    const S* row = mv + i * c;
    for (std::size_t j = 0; j < c; ++j) acc += row[j] * vv[j];
    y[i] = acc;
  }
  return detail::make_result<S>({r}, std::move(y), {m, v}, [r, c](detail::Node<S>& self) {
    const S* mv = self.parents[0]->value.data();
    const S* vv = self.parents[1]->value.data();
    const S* go = self.grad.data();
    if (S* g = detail::parent_grad(self, 0))
      for (std::size_t i = 0; i < r; ++i) {
        S* row = g + i * c;
        for (std::size_t j = 0; j < c; ++j) row[j] += go[i] * vv[j];
      }
    if (S* g = detail::parent_grad(self, 1))
      for (std::size_t i = 0; i < r; ++i) {
        const S* row = mv + i * c;
        for (std::size_t j = 0; j < c; ++j) g[j] += go[i] * row[j];
      }
  });
}

// v [r] times M [r, c] -> [c].
template <class S>
BasicTensor<S> vecmat(const BasicTensor<S>& v, const BasicTensor<S>& m) {
  detail::check_rank(m, 2, "vecmat");
  const std::size_t r = m.dim(0), c = m.dim(1);
  if (v.numel() != r)
    throw Error("shape mismatch in vecmat: " + shape_str(v.shape()) + " x " + shape_str(m.shape()));
  std::vector<S> y(c, S(0));
  const S* mv = m.data().data();
  for (std::size_t i = 0; i < r; ++i) {
    const S vi = v[i];
    const S* row = mv + i * c;
    for (std::size_t j = 0; j < c; ++j) y[j] += vi * row[j];
  }
  return detail::make_result<S>({c}, std::move(y), {v, m}, [r, c](detail::Node<S>& self) {
    const S* vv = self.parents[0]->value.data();
    const S* mv = self.parents[1]->value.data();
    const S* go = self.grad.data();
    if (S* g = detail::parent_grad(self, 0))
      for (std::size_t i = 0; i < r; ++i) {
        const S* row = mv + i * c;
        S acc = 0;
        for (std::size_t j = 0; j < c; ++j) acc += go[j] * row[j];
        g[i] += acc;
      }
    if (S* g = detail::parent_grad(self, 1))
      for (std::size_t i = 0; i < r; ++i) {
        S* row = g + i * c;
        for (std::size_t j = 0; j < c; ++j) row[j] += vv[i] * go[j];
      }
  });
}

// W [r, c] x [c] + b [r].
template <class S>
BasicTensor<S> linear(const BasicTensor<S>& w, const BasicTensor<S>& x, const BasicTensor<S>& b) {
  detail::check_rank(w, 2, "linear");
  const std::size_t r = w.dim(0), c = w.dim(1);
  if (x.numel() != c)
    throw Error("shape mismatch in linear: weight " + shape_str(w.shape()) + " input " + shape_str(x.shape()));
  if (b.numel() != r)
    throw Error("shape mismatch in linear: weight " + shape_str(w.shape()) + " bias " + shape_str(b.shape()));
  std::vector<S> y(r);
  const S* wv = w.data().data();
  const S* xv = x.data().data();
  for (std::size_t i = 0; i < r; ++i) {
    S acc = b[i];
    const S* row = wv + i * c;
    for (std::size_t j = 0; j < c; ++j) acc += row[j] * xv[j];
    y[i] = acc;
  }
  return detail::make_result<S>({r}, std::move(y), {w, x, b}, [r, c](detail::Node<S>& self) {
    const S* wv = self.parents[0]->value.data();
    const S* xv = self.parents[1]->value.data();
    const S* go = self.grad.data();
    if (S* g = detail::parent_grad(self, 0))
      for (std::size_t i = 0; i < r; ++i) {
        S* row = g + i * c;
        const S gi = go[i];
        for (std::size_t j = 0; j < c; ++j) row[j] += gi * xv[j];
      }
    if (S* g = detail::parent_grad(self, 1))
      for (std::size_t i = 0; i < r; ++i) {
        const S* row = wv + i * c;
        const S gi = go[i];
        for (std::size_t j = 0; j < c; ++j) g[j] += gi * row[j];
      }
    if (S* g = detail::parent_grad(self, 2))
      for (std::size_t i = 0; i < r; ++i) g[i] += go[i];
  });
}

// ---------------------------------------------------------------------------
// Structural

template <class S>
BasicTensor<S> concat(const std::vector<BasicTensor<S>>& parts) {
  std::vector<S> y;
  std::vector<std::size_t> sizes;
  for (const auto& p : parts) {
    y.insert(y.end(), p.data().begin(), p.data().end());
    sizes.push_back(p.numel());
  }
  const std::size_t n = y.size();
  return detail::make_result<S>({n}, std::move(y), parts, [sizes](detail::Node<S>& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      if (S* g = detail::parent_grad(self, k))
        for (std::size_t i = 0; i < sizes[k]; ++i) g[i] += self.grad[off + i];
      off += sizes[k];
    }
  });
}

template <class S>
BasicTensor<S> slice(const BasicTensor<S>& a, std::size_t start, std::size_t len) {
  if (start + len > a.numel())
    throw Error("slice [" + std::to_string(start) + ", " + std::to_string(start + len) + ") out of range for " +
                shape_str(a.shape()));
  std::vector<S> y(a.data().begin() + static_cast<std::ptrdiff_t>(start),
                   a.data().begin() + static_cast<std::ptrdiff_t>(start + len));
  return detail::make_result<S>({len}, std::move(y), {a}, [start, len](detail::Node<S>& self) {
    if (S* g = detail::parent_grad(self, 0))
      for (std::size_t i = 0; i < len; ++i) g[start + i] += self.grad[i];
  });
}

// Stacks equal-length vectors into a [n, d] matrix.
template <class S>
BasicTensor<S> stack(const std::vector<BasicTensor<S>>& rows) {
  if (rows.empty()) throw Error("stack of zero tensors");
  const std::size_t d = rows[0].numel();
  std::vector<S> y;
  y.reserve(rows.size() * d);
  for (const auto& r : rows) {
    if (r.numel() != d) throw Error("stack expects equal-length rows");
    y.insert(y.end(), r.data().begin(), r.data().end());
  }
  return detail::make_result<S>({rows.size(), d}, std::move(y), rows, [d](detail::Node<S>& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k)
      if (S* g = detail::parent_grad(self, k))
        for (std::size_t i = 0; i < d; ++i) g[i] += self.grad[k * d + i];
  });
}

// Row i of a [n, d] matrix (embedding lookup).
template <class S>
BasicTensor<S> row(const BasicTensor<S>& m, std::size_t i) {
  detail::check_rank(m, 2, "row");
  if (i >= m.dim(0)) throw Error("row " + std::to_string(i) + " out of range for " + shape_str(m.shape()));
  const std::size_t d = m.dim(1);
  std::vector<S> y(m.data().begin() + static_cast<std::ptrdiff_t>(i * d),
                   m.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
  return detail::make_result<S>({d}, std::move(y), {m}, [i, d](detail::Node<S>& self) {
    if (S* g = detail::parent_grad(self, 0))
      for (std::size_t j = 0; j < d; ++j) g[i * d + j] += self.grad[j];
  });
}

// Element i as a one-element tensor.
template <class S>
BasicTensor<S> pick(const BasicTensor<S>& a, std::size_t i) {
  if (i >= a.numel()) throw Error("pick index " + std::to_string(i) + " out of range for " + shape_str(a.shape()));
  return detail::make_result<S>({1}, {a[i]}, {a}, [i](detail::Node<S>& self) {
    if (S* g = detail::parent_grad(self, 0)) g[i] += self.grad[0];
  });
}

// Sum of the entries at the given positions.
template <class S>
BasicTensor<S> index_sum(const BasicTensor<S>& a, const std::vector<std::size_t>& positions) {
  S acc = 0;
  for (auto p : positions) {
    if (p >= a.numel()) throw Error("index_sum position out of range");
    acc += a[p];
  }
  return detail::make_result<S>({1}, {acc}, {a}, [positions](detail::Node<S>& self) {
    if (S* g = detail::parent_grad(self, 0))
      for (auto p : positions) g[p] += self.grad[0];
  });
}

// ---------------------------------------------------------------------------
// Normalization and losses

// Softmax along `axis`, computed with max subtraction.
template <class S>
BasicTensor<S> softmax(const BasicTensor<S>& x, std::size_t axis = 0) {
  if (axis >= x.rank()) throw Error("softmax axis " + std::to_string(axis) + " invalid for " + shape_str(x.shape()));
  std::size_t outer = 1, inner = 1;
  const std::size_t len = x.dim(axis);
  for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  for (S v : x.data())
    if (!std::isfinite(v)) throw Error("non-finite logits");
  std::vector<S> y(x.numel());
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      S mx = x[base];
      for (std::size_t k = 1; k < len; ++k) mx = std::max(mx, x[base + k * inner]);
      S z = 0;
      for (std::size_t k = 0; k < len; ++k) z += (y[base + k * inner] = std::exp(x[base + k * inner] - mx));
      for (std::size_t k = 0; k < len; ++k) y[base + k * inner] /= z;
    }
  return detail::make_result<S>(x.shape(), std::move(y), {x}, [outer, inner, len](detail::Node<S>& self) {
    S* g = detail::parent_grad(self, 0);
    if (!g) return;
    const auto& y = self.value;
    const auto& go = self.grad;
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * len * inner + in;
        S s = 0;
        for (std::size_t k = 0; k < len; ++k) s += go[base + k * inner] * y[base + k * inner];
        for (std::size_t k = 0; k < len; ++k) g[base + k * inner] += y[base + k * inner] * (go[base + k * inner] - s);
      }
  });
}

// Mean binary cross-entropy with probabilities clamped to [1e-7, 1 - 1e-7].
template <class S>
BasicTensor<S> binary_cross_entropy(const BasicTensor<S>& q, const std::vector<int>& labels) {
  if (q.numel() != labels.size())
    throw Error("label length " + std::to_string(labels.size()) + " does not match prediction length " +
                std::to_string(q.numel()));
  if (labels.empty()) throw Error("binary_cross_entropy of empty sequence");
  constexpr S lo = S(1e-7), hi = S(1) - S(1e-7);
  const S inv_n = S(1) / static_cast<S>(labels.size());
  S acc = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const S p = std::clamp(q[i], lo, hi);
    acc -= labels[i] ? std::log(p) : std::log(S(1) - p);
  }
  return detail::make_result<S>({1}, {acc * inv_n}, {q}, [labels, inv_n](detail::Node<S>& self) {
    S* g = detail::parent_grad(self, 0);
    if (!g) return;
    const auto& qv = self.parents[0]->value;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const S p = qv[i];
      if (p < lo || p > hi) continue;
      g[i] += self.grad[0] * inv_n * (labels[i] ? -S(1) / p : S(1) / (S(1) - p));
    }
  });
}

// Inverted dropout; identity when rate is zero.
template <class S>
BasicTensor<S> dropout(const BasicTensor<S>& x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw Error("dropout rate must be below 1");
  const S keep_scale = S(1) / static_cast<S>(1.0 - rate);
  std::vector<S> mask(x.numel());
  for (auto& m : mask) m = rng.uniform() < rate ? S(0) : keep_scale;
  return mul(x, BasicTensor<S>::from(x.shape(), std::move(mask)));
}

}  // namespace busum
