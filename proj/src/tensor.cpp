// Copyright 2026 The amp-motion Authors
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

#include "amp/tensor.hpp"

#include "amp/errors.hpp"
#include "amp/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>

namespace amp
{
namespace
{
thread_local bool g_grad_enabled = true;

using NodePtr = std::shared_ptr<detail::Node>;

NodePtr make_leaf(Shape shape, std::vector<double> values, bool requires_grad)
{
  auto n = std::make_shared<detail::Node>();
  if (values.size() != shape_numel(shape)) {
    throw ShapeError(
      "tensor data length " + std::to_string(values.size()) + " does not match shape " +
      shape_to_string(shape));
  }
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return n;
}

/// Creates an op result. `backward` is attached only when the graph is recorded.
template <typename Backward>
Tensor make_result(
  const char * op, Shape shape, std::vector<double> values, std::vector<NodePtr> inputs,
  Backward && backward)
{
  auto n = make_leaf(std::move(shape), std::move(values), false);
  n->op = op;
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto & in : inputs) {
      needs = needs || in->requires_grad;
    }
  }
  if (needs) {
    n->requires_grad = true;
    n->inputs = std::move(inputs);
    n->backward = std::forward<Backward>(backward);
  }
  return Tensor(n);
}

void require_rank(const Tensor & t, std::size_t rank, const char * op)
{
  if (!t.defined()) {
    throw UsageError(std::string(op) + ": undefined tensor");
  }
  if (t.rank() != rank) {
    throw ShapeError(
      std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
      shape_to_string(t.shape()));
  }
}

void require_same_shape(const Tensor & a, const Tensor & b, const char * op)
{
  if (a.shape() != b.shape()) {
    throw ShapeError(
      std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
      shape_to_string(b.shape()));
  }
}

void check_offsets(std::span<const std::size_t> offsets, std::size_t rows, const char * op)
{
  if (offsets.empty() || offsets.front() != 0 || offsets.back() != rows) {
    throw ShapeError(std::string(op) + ": segment offsets must span [0, rows]");
  }
  for (std::size_t i = 1; i < offsets.size(); ++i) {
    if (offsets[i] < offsets[i - 1]) {
      throw ShapeError(std::string(op) + ": segment offsets must be non-decreasing");
    }
  }
}
}  // namespace

std::size_t shape_numel(const Shape & shape)
{
  std::size_t n = 1;
  for (std::size_t d : shape) {
    n *= d;
  }
  return n;
}

std::string shape_to_string(const Shape & shape)
{
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    os << (i ? ", " : "") << shape[i];
  }
  os << ']';
  return os.str();
}

// --- Tensor ------------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad)
{
  const std::size_t n = shape_numel(shape);
  return Tensor(make_leaf(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad)
{
  const std::size_t n = shape_numel(shape);
  return Tensor(make_leaf(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad)
{
  return Tensor(make_leaf(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad)
{
  return Tensor(make_leaf({}, {value}, requires_grad));
}

const Shape & Tensor::shape() const
{
  if (!node_) {
    throw UsageError("undefined tensor");
  }
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t i) const
{
  const Shape & s = shape();
  if (i >= s.size()) {
    throw ShapeError("dim " + std::to_string(i) + " out of range for " + shape_to_string(s));
  }
  return s[i];
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::span<const double> Tensor::data() const
{
  if (!node_) {
    throw UsageError("undefined tensor");
  }
  return node_->value;
}

std::span<double> Tensor::mutable_data()
{
  if (!node_) {
    throw UsageError("undefined tensor");
  }
  return node_->value;
}

double Tensor::item() const
{
  if (numel() != 1) {
    throw UsageError("item() on tensor of shape " + shape_to_string(shape()));
  }
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool on)
{
  if (!node_) {
    throw UsageError("undefined tensor");
  }
  node_->requires_grad = on;
}

std::span<const double> Tensor::grad() const
{
  if (!node_) {
    throw UsageError("undefined tensor");
  }
  return node_->grad;
}

std::span<double> Tensor::mutable_grad()
{
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad()
{
  if (node_) {
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
  }
}

Tensor Tensor::detach() const { return Tensor(make_leaf(shape(), node_->value, false)); }

const char * Tensor::op_name() const { return node_ ? node_->op : "undefined"; }

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

// --- tape traversal ------------------------------------------------------------

namespace
{
/// Post-order DFS: every node appears after all of its inputs.
std::vector<detail::Node *> topological_order(detail::Node * root)
{
  std::vector<detail::Node *> order;
  std::unordered_set<detail::Node *> seen;
  std::vector<std::pair<detail::Node *, std::size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    auto & [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node * child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}
}  // namespace

void backward(const Tensor & loss)
{
  if (!loss.defined() || loss.numel() != 1) {
    throw UsageError("backward: loss must be a scalar tensor");
  }
  detail::Node * root = loss.node();
  if (!root->requires_grad) {
    return;
  }
  const auto order = topological_order(root);
  for (detail::Node * n : order) {
    if (n->backward) {
      n->grad.assign(n->value.size(), 0.0);
    } else {
      n->ensure_grad();
    }
  }
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) {
      (*it)->backward();
    }
  }
}

std::size_t tape_size(const Tensor & root)
{
  if (!root.defined() || !root.requires_grad()) {
    return 0;
  }
  std::size_t ops = 0;
  for (detail::Node * n : topological_order(root.node())) {
    ops += n->backward ? 1 : 0;
  }
  return ops;
}

// --- elementwise -----------------------------------------------------------------

Tensor add(const Tensor & a, const Tensor & b)
{
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  const auto av = a.data();
  const auto bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = av[i] + bv[i];
  }
  auto an = a.node_ptr();
  auto bn = b.node_ptr();
  Tensor r = make_result("add", a.shape(), std::move(out), {an, bn}, [] {});
  if (r.requires_grad()) {
    detail::Node * self = r.node();
    self->backward = [self, an = an.get(), bn = bn.get()] {
      for (detail::Node * in : {an, bn}) {
        if (in->requires_grad) {
          in->ensure_grad();
          for (std::size_t i = 0; i < self->grad.size(); ++i) {
            in->grad[i] += self->grad[i];
          }
        }
      }
    };
  }
  return r;
}

Tensor sub(const Tensor & a, const Tensor & b)
{
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  const auto av = a.data();
  const auto bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = av[i] - bv[i];
  }
  Tensor r = make_result("sub", a.shape(), std::move(out), {a.node_ptr(), b.node_ptr()}, [] {});
  if (r.requires_grad()) {
    detail::Node * self = r.node();
    self->backward = [self, an = a.node(), bn = b.node()] {
      if (an->requires_grad) {
        an->ensure_grad();
        for (std::size_t i = 0; i < self->grad.size(); ++i) {
          an->grad[i] += self->grad[i];
        }
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < self->grad.size(); ++i) {
          bn->grad[i] -= self->grad[i];
        }
      }
    };
  }
  return r;
}

Tensor mul(const Tensor & a, const Tensor & b)
{
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  const auto av = a.data();
  const auto bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = av[i] * bv[i];
  }
  Tensor r = make_result("mul", a.shape(), std::move(out), {a.node_ptr(), b.node_ptr()}, [] {});
  if (r.requires_grad()) {
    detail::Node * self = r.node();
    self->backward = [self, an = a.node(), bn = b.node()] {
      if (an->requires_grad) {
        an->ensure_grad();
        for (std::size_t i = 0; i < self->grad.size(); ++i) {
          an->grad[i] += self->grad[i] * bn->value[i];
        }
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < self->grad.size(); ++i) {
          bn->grad[i] += self->grad[i] * an->value[i];
        }
      }
    };
  }
  return r;
}

Tensor scale(const Tensor & a, double s)
{
  std::vector<double> out(a.data().begin(), a.data().end());
  for (double & v : out) {
    v *= s;
  }
  Tensor r = make_result("scale", a.shape(), std::move(out), {a.node_ptr()}, [] {});
  if (r.requires_grad()) {
    detail::Node * self = r.node();
    self->backward = [self, an = a.node(), s] {
      an->ensure_grad();
      for (std::size_t i = 0; i < self->grad.size(); ++i) {
        an->grad[i] += s * self->grad[i];
      }
    };
  }
  return r;
}

Tensor add_bias(const Tensor & x, const Tensor & b)
{
  require_rank(x, 2, "add_bias");
  require_rank(b, 1, "add_bias");
  const std::size_t m = x.rows();
  const std::size_t n = x.cols();
  if (b.dim(0) != n) {
    throw ShapeError(
      "add_bias: bias width " + std::to_string(b.dim(0)) + " vs columns " + std::to_string(n));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  const auto bv = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] += bv[j];
    }
  }
  Tensor r = make_result("add_bias", x.shape(), std::move(out), {x.node_ptr(), b.node_ptr()}, [] {});
  if (r.requires_grad()) {
    detail::Node * self = r.node();
    self->backward = [self, xn = x.node(), bn = b.node(), m, n] {
      if (xn->requires_grad) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < m * n; ++i) {
          xn->grad[i] += self->grad[i];
        }
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            bn->grad[j] += self->grad[i * n + j];
          }
        }
      }
    };
  }
  return r;
}

Tensor relu(const Tensor & x)
{
  std::vector<double> out(x.data().begin(), x.data().end());
  for (double & v : out) {
    // NaN passes through so non-finite values stay visible downstream.
    v = v < 0.0 ? 0.0 : v;
  }
  Tensor r = make_result("relu", x.shape(), std::move(out), {x.node_ptr()}, [] {});
  if (r.requires_grad()) {
    detail::Node * self = r.node();
    self->backward = [self, xn = x.node()] {
      xn->ensure_grad();
      for (std::size_t i = 0; i < self->grad.size(); ++i) {
        if (!(xn->value[i] <= 0.0)) {
          xn->grad[i] += self->grad[i];
        }
      }
    };
  }
  return r;
}

Tensor scale_rows(const Tensor & x, std::span<const double> factors)
{
  require_rank(x, 2, "scale_rows");
  const std::size_t m = x.rows();
  const std::size_t n = x.cols();
  if (factors.size() != m) {
    throw ShapeError("scale_rows: factor count mismatch");
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] *= factors[i];
    }
  }
  std::vector<double> f(factors.begin(), factors.end());
  Tensor r = make_result("scale_rows", x.shape(), std::move(out), {x.node_ptr()}, [] {});
  if (r.requires_grad()) {
    detail::Node * self = r.node();
    self->backward = [self, xn = x.node(), f = std::move(f), m, n] {
      xn->ensure_grad();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          xn->grad[i * n + j] += f[i] * self->grad[i * n + j];
        }
      }
    };
  }
  return r;
}

Tensor sum(const Tensor & x)
{
  double s = 0.0;
  for (double v : x.data()) {
    s += v;
  }
  Tensor r = make_result("sum", {}, {s}, {x.node_ptr()}, [] {});
  if (r.requires_grad()) {
    detail::Node * self = r.node();
    self->backward = [self, xn = x.node()] {
      xn->ensure_grad();
      for (double & g : xn->grad) {
        g += self->grad[0];
      }
    };
  }
  return r;
}

Tensor mean(const Tensor & x)
{
  const std::size_t n = x.numel();
  if (n == 0) {
    throw ShapeError("mean: empty tensor");
  }
  return scale(sum(x), 1.0 / static_cast<double>(n));
}

Tensor reshape(const Tensor & x, Shape shape)
{
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError(
      "reshape: " + shape_to_string(x.shape()) + " to " + shape_to_string(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  Tensor r = make_result("reshape", std::move(shape), std::move(out), {x.node_ptr()}, [] {});
  if (r.requires_grad()) {
    detail::Node * self = r.node();
    self->backward = [self, xn = x.node()] {
      xn->ensure_grad();
      for (std::size_t i = 0; i < self->grad.size(); ++i) {
        xn->grad[i] += self->grad[i];
      }
    };
  }
  return r;
}

Tensor concat_cols(std::span<const Tensor> parts)
{
  if (parts.empty()) {
    throw ShapeError("concat_cols: no inputs");
  }
  const std::size_t m = parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  std::vector<NodePtr> inputs;
  for (const Tensor & p : parts) {
    require_rank(p, 2, "concat_cols");
    if (p.rows() != m) {
      throw ShapeError("concat_cols: row count mismatch");
    }
    widths.push_back(p.cols());
    total += p.cols();
    inputs.push_back(p.node_ptr());
  }
  std::vector<double> out(m * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto pv = parts[k].data();
    const std::size_t w = widths[k];
    for (std::size_t i = 0; i < m; ++i) {
      std::copy_n(pv.begin() + static_cast<std::ptrdiff_t>(i * w), w, out.begin() + static_cast<std::ptrdiff_t>(i * total + offset));
    }
    offset += w;
  }
  Tensor r = make_result("concat_cols", {m, total}, std::move(out), inputs, [] {});
  if (r.requires_grad()) {
    detail::Node * self = r.node();
    std::vector<detail::Node *> raw;
    for (const auto & in : inputs) {
      raw.push_back(in.get());
    }
    self->backward = [self, raw = std::move(raw), widths = std::move(widths), m, total] {
      std::size_t off = 0;
      for (std::size_t k = 0; k < raw.size(); ++k) {
        const std::size_t w = widths[k];
        if (raw[k]->requires_grad) {
          raw[k]->ensure_grad();
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < w; ++j) {
              raw[k]->grad[i * w + j] += self->grad[i * total + off + j];
            }
          }
        }
        off += w;
      }
    };
  }
  return r;
}

Tensor concat_rows(std::span<const Tensor> parts)
{
  if (parts.empty()) {
    throw ShapeError("concat_rows: no inputs");
  }
  const std::size_t n = parts[0].cols();
  std::size_t m = 0;
  std::vector<NodePtr> inputs;
  std::vector<double> out;
  for (const Tensor & p : parts) {
    require_rank(p, 2, "concat_rows");
    if (p.cols() != n) {
      throw ShapeError("concat_rows: column count mismatch");
    }
    m += p.rows();
    inputs.push_back(p.node_ptr());
  }
  out.reserve(m * n);
  for (const Tensor & p : parts) {
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  Tensor r = make_result("concat_rows", {m, n}, std::move(out), inputs, [] {});
  if (r.requires_grad()) {
    detail::Node * self = r.node();
    std::vector<detail::Node *> raw;
    for (const auto & in : inputs) {
      raw.push_back(in.get());
    }
    self->backward = [self, raw = std::move(raw)] {
      std::size_t off = 0;
      for (detail::Node * in : raw) {
        const std::size_t len = in->value.size();
        if (in->requires_grad) {
          in->ensure_grad();
          for (std::size_t i = 0; i < len; ++i) {
            in->grad[i] += self->grad[off + i];
          }
        }
        off += len;
      }
    };
  }
  return r;
}

Tensor gather_rows(const Tensor & x, std::span<const std::size_t> indices)
{
  require_rank(x, 2, "gather_rows");
  const std::size_t n = x.cols();
  const std::size_t rows = x.rows();
  std::vector<double> out(indices.size() * n);
  const auto xv = x.data();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows) {
      throw ShapeError("gather_rows: index out of range");
    }
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(indices[i] * n), n, out.begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  Tensor r = make_result("gather_rows", {indices.size(), n}, std::move(out), {x.node_ptr()}, [] {});
  if (r.requires_grad()) {
    detail::Node * self = r.node();
    self->backward = [self, xn = x.node(), idx = std::move(idx), n] {
      xn->ensure_grad();
      for (std::size_t i = 0; i < idx.size(); ++i) {
        double * dst = xn->grad.data() + idx[i] * n;
        const double * src = self->grad.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) {
          dst[j] += src[j];
        }
      }
    };
  }
  return r;
}

Tensor slice_cols(const Tensor & x, std::size_t begin, std::size_t end)
{
  require_rank(x, 2, "slice_cols");
  const std::size_t m = x.rows();
  const std::size_t n = x.cols();
  if (begin > end || end > n) {
    throw ShapeError("slice_cols: range out of bounds");
  }
  const std::size_t w = end - begin;
  std::vector<double> out(m * w);
  const auto xv = x.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      out[i * w + j] = xv[i * n + begin + j];
    }
  }
  Tensor r = make_result("slice_cols", {m, w}, std::move(out), {x.node_ptr()}, [] {});
  if (r.requires_grad()) {
    detail::Node * self = r.node();
    self->backward = [self, xn = x.node(), m, n, w, begin] {
      xn->ensure_grad();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
          xn->grad[i * n + begin + j] += self->grad[i * w + j];
        }
      }
    };
  }
  return r;
}

// --- matmul ---------------------------------------------------------------------

Tensor matmul(const Tensor & a, const Tensor & b)
{
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.rows();
  const std::size_t k = a.cols();
  const std::size_t n = b.cols();
  if (b.rows() != k) {
    throw ShapeError(
      "matmul: inner dimensions differ " + shape_to_string(a.shape()) + " @ " +
      shape_to_string(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  const double * av = a.data().data();
  const double * bv = b.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double * c = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      const double * brow = bv + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        c[j] += aip * brow[j];
      }
    }
  }
  Tensor r = make_result("matmul", {m, n}, std::move(out), {a.node_ptr(), b.node_ptr()}, [] {});
  if (r.requires_grad()) {
    detail::Node * self = r.node();
    self->backward = [self, an = a.node(), bn = b.node(), m, k, n] {
      const double * g = self->grad.data();
      if (an->requires_grad) {
        // dA = dC B^T
        an->ensure_grad();
        // B^T rows make the inner loop contiguous; each dA entry still sums over j in order.
        const double * bv = bn->value.data();
        std::vector<double> bt(n * k);
        for (std::size_t p = 0; p < k; ++p) {
          for (std::size_t j = 0; j < n; ++j) {
            bt[j * k + p] = bv[p * n + j];
          }
        }
        std::vector<double> acc(k);
        for (std::size_t i = 0; i < m; ++i) {
          const double * gi = g + i * n;
          std::fill(acc.begin(), acc.end(), 0.0);
          for (std::size_t j = 0; j < n; ++j) {
            const double gij = gi[j];
            const double * btrow = bt.data() + j * k;
            for (std::size_t p = 0; p < k; ++p) {
              acc[p] += gij * btrow[p];
            }
          }
          double * da = an->grad.data() + i * k;
          for (std::size_t p = 0; p < k; ++p) {
            da[p] += acc[p];
          }
        }
      }
      if (bn->requires_grad) {
        // dB = A^T dC
        bn->ensure_grad();
        const double * av = an->value.data();
        for (std::size_t i = 0; i < m; ++i) {
          const double * gi = g + i * n;
          for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            if (aip == 0.0) {
              continue;
            }
            double * dbrow = bn->grad.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) {
              dbrow[j] += aip * gi[j];
            }
          }
        }
      }
    };
  }
  return r;
}

// --- softmax / layer norm / losses ------------------------------------------------

Tensor softmax(const Tensor & x, std::size_t axis)
{
  const Shape & s = x.shape();
  if (axis >= s.size()) {
    throw ShapeError("softmax: axis out of range");
  }
  std::size_t outer = 1;
  std::size_t inner = 1;
  for (std::size_t i = 0; i < axis; ++i) {
    outer *= s[i];
  }
  for (std::size_t i = axis + 1; i < s.size(); ++i) {
    inner *= s[i];
  }
  const std::size_t len = s[axis];
  const auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < len; ++j) {
        mx = std::max(mx, xv[base + j * inner]);
      }
      double z = 0.0;
      for (std::size_t j = 0; j < len; ++j) {
        const double e = std::exp(xv[base + j * inner] - mx);
        out[base + j * inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < len; ++j) {
        out[base + j * inner] /= z;
      }
    }
  }
  Tensor r = make_result("softmax", s, std::move(out), {x.node_ptr()}, [] {});
  if (r.requires_grad()) {
    detail::Node * self = r.node();
    self->backward = [self, xn = x.node(), outer, inner, len] {
      xn->ensure_grad();
      const auto & y = self->value;
      const auto & g = self->grad;
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
          const std::size_t base = o * len * inner + in;
          double dot = 0.0;
          for (std::size_t j = 0; j < len; ++j) {
            dot += g[base + j * inner] * y[base + j * inner];
          }
          for (std::size_t j = 0; j < len; ++j) {
            const std::size_t idx = base + j * inner;
            xn->grad[idx] += y[idx] * (g[idx] - dot);
          }
        }
      }
    };
  }
  return r;
}

Tensor layer_norm(const Tensor & x, const Tensor & gamma, const Tensor & beta, double eps)
{
  require_rank(x, 2, "layer_norm");
  const std::size_t m = x.rows();
  const std::size_t n = x.cols();
  if (gamma.numel() != n || beta.numel() != n) {
    throw ShapeError("layer_norm: gamma/beta width must match the last dimension");
  }
  const auto xv = x.data();
  const auto gv = gamma.data();
  const auto bv = beta.data();
  std::vector<double> out(m * n);
  std::vector<double> xhat(m * n);
  std::vector<double> inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      mu += xv[i * n + j];
    }
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = xv[i * n + j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (xv[i * n + j] - mu) * inv_std[i];
      xhat[i * n + j] = h;
      out[i * n + j] = gv[j] * h + bv[j];
    }
  }
  Tensor r = make_result(
    "layer_norm", x.shape(), std::move(out), {x.node_ptr(), gamma.node_ptr(), beta.node_ptr()},
    [] {});
  if (r.requires_grad()) {
    detail::Node * self = r.node();
    self->backward = [self, xn = x.node(), gn = gamma.node(), bn = beta.node(),
                      xhat = std::move(xhat), inv_std = std::move(inv_std), m, n] {
      const auto & g = self->grad;
      if (gn->requires_grad) {
        gn->ensure_grad();
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
      }
      if (xn->requires_grad) {
        xn->ensure_grad();
      }
      std::vector<double> dxhat(n);
      for (std::size_t i = 0; i < m; ++i) {
        double mean_d = 0.0;
        double mean_dx = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          const std::size_t idx = i * n + j;
          if (gn->requires_grad) {
            gn->grad[j] += g[idx] * xhat[idx];
          }
          if (bn->requires_grad) {
            bn->grad[j] += g[idx];
          }
          dxhat[j] = g[idx] * gn->value[j];
          mean_d += dxhat[j];
          mean_dx += dxhat[j] * xhat[idx];
        }
        if (!xn->requires_grad) {
          continue;
        }
        mean_d /= static_cast<double>(n);
        mean_dx /= static_cast<double>(n);
        for (std::size_t j = 0; j < n; ++j) {
          const std::size_t idx = i * n + j;
          xn->grad[idx] += inv_std[i] * (dxhat[j] - mean_d - xhat[idx] * mean_dx);
        }
      }
    };
  }
  return r;
}

Tensor cross_entropy(const Tensor & logits, std::span<const int> labels)
{
  require_rank(logits, 2, "cross_entropy");
  const std::size_t m = logits.rows();
  const std::size_t k = logits.cols();
  if (labels.size() != m) {
    throw ShapeError("cross_entropy: label count mismatch");
  }
  const auto lv = logits.data();
  std::vector<double> prob(m * k);
  std::size_t count = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
      mx = std::max(mx, lv[i * k + j]);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      z += std::exp(lv[i * k + j] - mx);
    }
    const double log_z = mx + std::log(z);
    for (std::size_t j = 0; j < k; ++j) {
      prob[i * k + j] = std::exp(lv[i * k + j] - log_z);
    }
    if (labels[i] >= 0) {
      if (static_cast<std::size_t>(labels[i]) >= k) {
        throw ShapeError("cross_entropy: label out of range");
      }
      total += log_z - lv[i * k + static_cast<std::size_t>(labels[i])];
      ++count;
    }
  }
  const double norm = count ? 1.0 / static_cast<double>(count) : 0.0;
  std::vector<int> lab(labels.begin(), labels.end());
  Tensor r = make_result("cross_entropy", {}, {total * norm}, {logits.node_ptr()}, [] {});
  if (r.requires_grad()) {
    detail::Node * self = r.node();
    self->backward = [self, ln = logits.node(), prob = std::move(prob), lab = std::move(lab), m, k,
                      norm] {
      ln->ensure_grad();
      const double g = self->grad[0] * norm;
      for (std::size_t i = 0; i < m; ++i) {
        if (lab[i] < 0) {
          continue;
        }
        for (std::size_t j = 0; j < k; ++j) {
          const double onehot = static_cast<int>(j) == lab[i] ? 1.0 : 0.0;
          ln->grad[i * k + j] += g * (prob[i * k + j] - onehot);
        }
      }
    };
  }
  return r;
}

Tensor smooth_l1(
  const Tensor & pred, std::span<const double> target, std::span<const double> weights, double delta)
{
  const std::size_t n = pred.numel();
  if (target.size() != n || weights.size() != n) {
    throw ShapeError("smooth_l1: target/weight length mismatch");
  }
  const auto pv = pred.data();
  std::vector<double> dgrad(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (weights[i] == 0.0) {
      continue;
    }
    const double d = pv[i] - target[i];
    const double ad = std::abs(d);
    if (ad < delta) {
      total += weights[i] * 0.5 * d * d / delta;
      dgrad[i] = weights[i] * d / delta;
    } else {
      total += weights[i] * (ad - 0.5 * delta);
      dgrad[i] = weights[i] * (d > 0.0 ? 1.0 : -1.0);
    }
  }
  Tensor r = make_result("smooth_l1", {}, {total}, {pred.node_ptr()}, [] {});
  if (r.requires_grad()) {
    detail::Node * self = r.node();
    self->backward = [self, pn = pred.node(), dgrad = std::move(dgrad)] {
      pn->ensure_grad();
      const double g = self->grad[0];
      for (std::size_t i = 0; i < dgrad.size(); ++i) {
        pn->grad[i] += g * dgrad[i];
      }
    };
  }
  return r;
}

// --- attention --------------------------------------------------------------------

Tensor pair_attention(
  const Tensor & q, const Tensor & k, const Tensor & v, std::span<const std::size_t> offsets,
  std::size_t num_heads)
{
  require_rank(q, 2, "pair_attention");
  require_same_shape(q, k, "pair_attention");
  require_same_shape(q, v, "pair_attention");
  const std::size_t pairs = q.rows();
  const std::size_t d = q.cols();
  if (num_heads == 0 || d % num_heads != 0) {
    throw ConfigError(
      "attention width " + std::to_string(d) + " not divisible by " + std::to_string(num_heads) +
      " heads");
  }
  check_offsets(offsets, pairs, "pair_attention");
  const std::size_t nq = offsets.size() - 1;
  const std::size_t dh = d / num_heads;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const double * qv = q.data().data();
  const double * kv = k.data().data();
  const double * vv = v.data().data();
  std::vector<double> weights(pairs * num_heads, 0.0);
  std::vector<double> out(nq * d, 0.0);
  for (std::size_t i = 0; i < nq; ++i) {
    const std::size_t begin = offsets[i];
    const std::size_t end = offsets[i + 1];
    if (begin == end) {
      continue;
    }
    for (std::size_t h = 0; h < num_heads; ++h) {
      const std::size_t c0 = h * dh;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t p = begin; p < end; ++p) {
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) {
          s += qv[p * d + c0 + c] * kv[p * d + c0 + c];
        }
        s *= inv_scale;
        weights[p * num_heads + h] = s;
        mx = std::max(mx, s);
      }
      double z = 0.0;
      for (std::size_t p = begin; p < end; ++p) {
        const double e = std::exp(weights[p * num_heads + h] - mx);
        weights[p * num_heads + h] = e;
        z += e;
      }
      double * o = out.data() + i * d + c0;
      for (std::size_t p = begin; p < end; ++p) {
        const double a = weights[p * num_heads + h] / z;
        weights[p * num_heads + h] = a;
        for (std::size_t c = 0; c < dh; ++c) {
          o[c] += a * vv[p * d + c0 + c];
        }
      }
    }
  }
  std::vector<std::size_t> offs(offsets.begin(), offsets.end());
  Tensor r = make_result(
    "pair_attention", {nq, d}, std::move(out), {q.node_ptr(), k.node_ptr(), v.node_ptr()}, [] {});
  if (r.requires_grad()) {
    detail::Node * self = r.node();
    self->backward = [self, qn = q.node(), kn = k.node(), vn = v.node(), weights = std::move(weights),
                      offs = std::move(offs), num_heads, d, dh, inv_scale] {
      for (detail::Node * n : {qn, kn, vn}) {
        if (n->requires_grad) {
          n->ensure_grad();
        }
      }
      const double * g = self->grad.data();
      const auto & qv = qn->value;
      const auto & kv = kn->value;
      const auto & vv = vn->value;
      std::vector<double> da;
      for (std::size_t i = 0; i + 1 < offs.size(); ++i) {
        const std::size_t begin = offs[i];
        const std::size_t end = offs[i + 1];
        da.assign(end - begin, 0.0);
        for (std::size_t h = 0; h < num_heads; ++h) {
          const std::size_t c0 = h * dh;
          const double * gi = g + i * d + c0;
          double weighted = 0.0;
          for (std::size_t p = begin; p < end; ++p) {
            const double a = weights[p * num_heads + h];
            double dot = 0.0;
            for (std::size_t c = 0; c < dh; ++c) {
              dot += gi[c] * vv[p * d + c0 + c];
            }
            da[p - begin] = dot;
            weighted += a * dot;
            if (vn->requires_grad) {
              for (std::size_t c = 0; c < dh; ++c) {
                vn->grad[p * d + c0 + c] += a * gi[c];
              }
            }
          }
          for (std::size_t p = begin; p < end; ++p) {
            const double ds = weights[p * num_heads + h] * (da[p - begin] - weighted) * inv_scale;
            if (qn->requires_grad) {
              for (std::size_t c = 0; c < dh; ++c) {
                qn->grad[p * d + c0 + c] += ds * kv[p * d + c0 + c];
              }
            }
            if (kn->requires_grad) {
              for (std::size_t c = 0; c < dh; ++c) {
                kn->grad[p * d + c0 + c] += ds * qv[p * d + c0 + c];
              }
            }
          }
        }
      }
    };
  }
  return r;
}

Tensor rope(const Tensor & x, std::span<const double> positions, std::size_t head_dim, double base)
{
  require_rank(x, 2, "rope");
  if (head_dim == 0 || head_dim % 2 != 0) {
    throw ConfigError("rope: head dimension must be even and positive");
  }
  const std::size_t m = x.rows();
  const std::size_t d = x.cols();
  if (d % head_dim != 0) {
    throw ShapeError("rope: width not a multiple of head dimension");
  }
  if (positions.size() != m) {
    throw ShapeError("rope: one position per row required");
  }
  const std::size_t half = head_dim / 2;
  std::vector<double> inv_freq(half);
  for (std::size_t i = 0; i < half; ++i) {
    inv_freq[i] = std::pow(base, -2.0 * static_cast<double>(i) / static_cast<double>(head_dim));
  }
  std::vector<double> cs(m * half);
  std::vector<double> sn(m * half);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t i = 0; i < half; ++i) {
      const double angle = positions[r] * inv_freq[i];
      cs[r * half + i] = std::cos(angle);
      sn[r * half + i] = std::sin(angle);
    }
  }
  const auto xv = x.data();
  std::vector<double> out(m * d);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t h0 = 0; h0 < d; h0 += head_dim) {
      for (std::size_t i = 0; i < half; ++i) {
        const std::size_t a = r * d + h0 + 2 * i;
        const double c = cs[r * half + i];
        const double s = sn[r * half + i];
        out[a] = xv[a] * c - xv[a + 1] * s;
        out[a + 1] = xv[a] * s + xv[a + 1] * c;
      }
    }
  }
  Tensor res = make_result("rope", x.shape(), std::move(out), {x.node_ptr()}, [] {});
  if (res.requires_grad()) {
    detail::Node * self = res.node();
    self->backward = [self, xn = x.node(), cs = std::move(cs), sn = std::move(sn), m, d, head_dim,
                      half] {
      xn->ensure_grad();
      const auto & g = self->grad;
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t h0 = 0; h0 < d; h0 += head_dim) {
          for (std::size_t i = 0; i < half; ++i) {
            const std::size_t a = r * d + h0 + 2 * i;
            const double c = cs[r * half + i];
            const double s = sn[r * half + i];
            // Transpose of the rotation.
            xn->grad[a] += g[a] * c + g[a + 1] * s;
            xn->grad[a + 1] += -g[a] * s + g[a + 1] * c;
          }
        }
      }
    };
  }
  return res;
}

Tensor segment_max(const Tensor & x, std::span<const std::size_t> offsets)
{
  require_rank(x, 2, "segment_max");
  const std::size_t n = x.cols();
  check_offsets(offsets, x.rows(), "segment_max");
  const std::size_t segs = offsets.size() - 1;
  const auto xv = x.data();
  std::vector<double> out(segs * n, 0.0);
  std::vector<std::size_t> arg(segs * n, SIZE_MAX);
  for (std::size_t s = 0; s < segs; ++s) {
    for (std::size_t r = offsets[s]; r < offsets[s + 1]; ++r) {
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t o = s * n + j;
        if (arg[o] == SIZE_MAX || xv[r * n + j] > out[o]) {
          out[o] = xv[r * n + j];
          arg[o] = r;
        }
      }
    }
  }
  Tensor res = make_result("segment_max", {segs, n}, std::move(out), {x.node_ptr()}, [] {});
  if (res.requires_grad()) {
    detail::Node * self = res.node();
    self->backward = [self, xn = x.node(), arg = std::move(arg), n] {
      xn->ensure_grad();
      for (std::size_t o = 0; o < arg.size(); ++o) {
        if (arg[o] != SIZE_MAX) {
          xn->grad[arg[o] * n + o % n] += self->grad[o];
        }
      }
    };
  }
  return res;
}

Tensor dropout(const Tensor & x, double rate, Rng & rng)
{
  if (rate < 0.0 || rate >= 1.0) {
    throw ConfigError("dropout rate must be in [0, 1)");
  }
  if (rate == 0.0) {
    return x;
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.numel());
  for (double & m : mask) {
    m = rng.bernoulli(rate) ? 0.0 : keep_scale;
  }
  return mul(x, Tensor::from(x.shape(), std::move(mask)));
}

}  // namespace amp
