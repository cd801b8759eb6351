#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace metamt {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

// Dense row-major tensor with an optional gradient buffer. Rank is 1 or 2
// everywhere in this project; scalars are shape {1}.
template <class S>
struct TensorData {
  Shape shape;
  std::vector<S> v;
  std::vector<S> g;
  bool requires_grad{false};

  std::size_t size() const { return v.size(); }
  std::size_t rows() const { return shape.size() == 2 ? shape[0] : 1; }
  std::size_t cols() const { return shape.empty() ? 0 : shape.back(); }

  void ensure_grad() {
    if (g.size() != v.size()) g.assign(v.size(), S(0));
  }
  void zero_grad() { std::fill(g.begin(), g.end(), S(0)); }
};

template <class S>
using Var = std::shared_ptr<TensorData<S>>;

template <class S>
Var<S> make_var(Shape shape, bool requires_grad = false) {
  auto t = std::make_shared<TensorData<S>>();
  t->shape = std::move(shape);
  t->v.assign(numel(t->shape), S(0));
  t->requires_grad = requires_grad;
  if (requires_grad) t->ensure_grad();
  return t;
}

template <class S>
Var<S> constant(Shape shape, std::vector<S> values) {
  if (numel(shape) != values.size())
    throw ShapeError("constant: values do not fill shape " + shape_str(shape));
  auto t = std::make_shared<TensorData<S>>();
  t->shape = std::move(shape);
  t->v = std::move(values);
  return t;
}

template <class S>
Var<S> scalar(S value) {
  return constant<S>({1}, {value});
}

template <class S>
void check_finite(const char* op, const TensorData<S>& t) {
  for (std::size_t i = 0; i < t.v.size(); ++i) {
    if (!std::isfinite(static_cast<double>(t.v[i])))
      throw NumericError(std::string(op) + ": non-finite value at flat index " +
                         std::to_string(i));
  }
}

// Wengert list. Ops append themselves in execution order; backward replays
// in reverse, which visits each node exactly once in reverse topological
// order. Gradients accumulate additively until zeroed by the caller.
template <class S>
class Tape {
 public:
  void record(const char* op, std::function<void()> fn) {
    nodes_.push_back(Node{op, std::move(fn)});
  }

  void backward(const Var<S>& loss) {
    if (!loss || numel(loss->shape) != 1)
      throw ContractError("backward: loss must be a scalar tensor");
    if (!loss->requires_grad)
      throw ContractError("backward: loss was not recorded on a tape");
    loss->ensure_grad();
    loss->g[0] += S(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->fn();
  }

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    const char* op;
    std::function<void()> fn;
  };
  std::vector<Node> nodes_;
};

template <class S>
bool grad_needed(const Tape<S>* tape, std::initializer_list<Var<S>> inputs) {
  if (!tape) return false;
  for (const auto& in : inputs)
    if (in && in->requires_grad) return true;
  return false;
}

template <class S>
Var<S> make_out(Tape<S>* tape, Shape shape, std::initializer_list<Var<S>> inputs) {
  return make_var<S>(std::move(shape), grad_needed(tape, inputs));
}

// ---------------------------------------------------------------------------
// primitives
// ---------------------------------------------------------------------------

template <class S>
Var<S> matmul(Tape<S>* tape, const Var<S>& a, const Var<S>& b) {
  if (a->shape.size() != 2 || b->shape.size() != 2 || a->shape[1] != b->shape[0])
    throw ShapeError("matmul: incompatible shapes " + shape_str(a->shape) + " * " +
                     shape_str(b->shape));
  const std::size_t m = a->shape[0], k = a->shape[1], p = b->shape[1];
  auto out = make_out(tape, {m, p}, {a, b});
  const S* av = a->v.data();
  const S* bv = b->v.data();
  S* ov = out->v.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t kk = 0; kk < k; ++kk) {
      const S aik = av[i * k + kk];
      const S* brow = bv + kk * p;
      S* orow = ov + i * p;
      for (std::size_t j = 0; j < p; ++j) orow[j] += aik * brow[j];
    }
  check_finite("matmul", *out);
  if (out->requires_grad) {
    if (a->requires_grad) a->ensure_grad();
    if (b->requires_grad) b->ensure_grad();
    tape->record("matmul", [a, b, out, m, k, p] {
      if (a->requires_grad) {
        // dA = dC * B^T
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t kk = 0; kk < k; ++kk) {
            S acc = 0;
            const S* grow = out->g.data() + i * p;
            const S* brow = b->v.data() + kk * p;
            for (std::size_t j = 0; j < p; ++j) acc += grow[j] * brow[j];
            a->g[i * k + kk] += acc;
          }
      }
      if (b->requires_grad) {
        // dB = A^T * dC
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t kk = 0; kk < k; ++kk) {
            const S aik = a->v[i * k + kk];
            const S* grow = out->g.data() + i * p;
            S* brow = b->g.data() + kk * p;
            for (std::size_t j = 0; j < p; ++j) brow[j] += aik * grow[j];
          }
      }
    });
  }
  return out;
}

template <class S>
Var<S> add(Tape<S>* tape, const Var<S>& a, const Var<S>& b) {
  if (a->shape != b->shape)
    throw ShapeError("add: shape mismatch " + shape_str(a->shape) + " vs " +
                     shape_str(b->shape));
  auto out = make_out(tape, a->shape, {a, b});
  for (std::size_t i = 0; i < out->v.size(); ++i) out->v[i] = a->v[i] + b->v[i];
  check_finite("add", *out);
  if (out->requires_grad) {
    if (a->requires_grad) a->ensure_grad();
    if (b->requires_grad) b->ensure_grad();
    tape->record("add", [a, b, out] {
      const std::size_t n = out->v.size();
      if (a->requires_grad)
        for (std::size_t i = 0; i < n; ++i) a->g[i] += out->g[i];
      if (b->requires_grad)
        for (std::size_t i = 0; i < n; ++i) b->g[i] += out->g[i];
    });
  }
  return out;
}

// x: [m x n], bias: [n]; adds bias to every row.
template <class S>
Var<S> add_rowwise(Tape<S>* tape, const Var<S>& x, const Var<S>& bias) {
  const std::size_t m = x->rows(), n = x->cols();
  if (bias->shape.size() != 1 || bias->shape[0] != n)
    throw ShapeError("add_rowwise: bias " + shape_str(bias->shape) +
                     " does not match row width " + std::to_string(n));
  auto out = make_out(tape, x->shape, {x, bias});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out->v[i * n + j] = x->v[i * n + j] + bias->v[j];
  check_finite("add_rowwise", *out);
  if (out->requires_grad) {
    if (x->requires_grad) x->ensure_grad();
    if (bias->requires_grad) bias->ensure_grad();
    tape->record("add_rowwise", [x, bias, out, m, n] {
      if (x->requires_grad)
        for (std::size_t i = 0; i < m * n; ++i) x->g[i] += out->g[i];
      if (bias->requires_grad)
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) bias->g[j] += out->g[i * n + j];
    });
  }
  return out;
}

template <class S>
Var<S> ewmul(Tape<S>* tape, const Var<S>& a, const Var<S>& b) {
  if (a->shape != b->shape)
    throw ShapeError("ewmul: shape mismatch " + shape_str(a->shape) + " vs " +
                     shape_str(b->shape));
  auto out = make_out(tape, a->shape, {a, b});
  for (std::size_t i = 0; i < out->v.size(); ++i) out->v[i] = a->v[i] * b->v[i];
  check_finite("ewmul", *out);
  if (out->requires_grad) {
    if (a->requires_grad) a->ensure_grad();
    if (b->requires_grad) b->ensure_grad();
    tape->record("ewmul", [a, b, out] {
      const std::size_t n = out->v.size();
      if (a->requires_grad)
        for (std::size_t i = 0; i < n; ++i) a->g[i] += out->g[i] * b->v[i];
      if (b->requires_grad)
        for (std::size_t i = 0; i < n; ++i) b->g[i] += out->g[i] * a->v[i];
    });
  }
  return out;
}

template <class S>
Var<S> scale(Tape<S>* tape, const Var<S>& x, S c) {
  auto out = make_out(tape, x->shape, {x});
  for (std::size_t i = 0; i < out->v.size(); ++i) out->v[i] = x->v[i] * c;
  check_finite("scale", *out);
  if (out->requires_grad) {
    x->ensure_grad();
    tape->record("scale", [x, out, c] {
      for (std::size_t i = 0; i < out->v.size(); ++i) x->g[i] += out->g[i] * c;
    });
  }
  return out;
}

template <class S>
Var<S> relu(Tape<S>* tape, const Var<S>& x) {
  auto out = make_out(tape, x->shape, {x});
  for (std::size_t i = 0; i < out->v.size(); ++i) out->v[i] = x->v[i] > S(0) ? x->v[i] : S(0);
  check_finite("relu", *out);
  if (out->requires_grad) {
    x->ensure_grad();
    tape->record("relu", [x, out] {
      for (std::size_t i = 0; i < out->v.size(); ++i)
        if (x->v[i] > S(0)) x->g[i] += out->g[i];
    });
  }
  return out;
}

template <class S>
Var<S> sum_all(Tape<S>* tape, const Var<S>& x) {
  auto out = make_out(tape, {1}, {x});
  S acc = 0;
  for (std::size_t i = 0; i < x->v.size(); ++i) acc += x->v[i];
  out->v[0] = acc;
  check_finite("sum_all", *out);
  if (out->requires_grad) {
    x->ensure_grad();
    tape->record("sum_all", [x, out] {
      for (std::size_t i = 0; i < x->v.size(); ++i) x->g[i] += out->g[0];
    });
  }
  return out;
}

namespace detail {

// Iterate 1-D or 2-D tensors as lines along an axis.
struct AxisLines {
  std::size_t count;   // number of lines
  std::size_t len;     // elements per line
  std::size_t stride;  // distance between consecutive elements of a line
  std::size_t step;    // distance between line starts
};

inline AxisLines axis_lines(const Shape& shape, std::size_t axis) {
  if (shape.size() == 1) {
    if (axis != 0) throw ShapeError("axis out of range for rank-1 tensor");
    return {1, shape[0], 1, 0};
  }
  if (shape.size() != 2) throw ShapeError("softmax: only rank 1 or 2 supported");
  if (axis == 1) return {shape[0], shape[1], 1, shape[1]};
  if (axis == 0) return {shape[1], shape[0], shape[1], 1};
  throw ShapeError("axis out of range for rank-2 tensor");
}

}  // namespace detail

// Numerically stable softmax along `axis` (max subtraction per line).
template <class S>
Var<S> softmax(Tape<S>* tape, const Var<S>& x, std::size_t axis) {
  const auto lines = detail::axis_lines(x->shape, axis);
  auto out = make_out(tape, x->shape, {x});
  for (std::size_t l = 0; l < lines.count; ++l) {
    const std::size_t base = l * lines.step;
    S mx = x->v[base];
    for (std::size_t i = 1; i < lines.len; ++i)
      mx = std::max(mx, x->v[base + i * lines.stride]);
    S denom = 0;
    for (std::size_t i = 0; i < lines.len; ++i) {
      const S e = std::exp(x->v[base + i * lines.stride] - mx);
      out->v[base + i * lines.stride] = e;
      denom += e;
    }
    for (std::size_t i = 0; i < lines.len; ++i) out->v[base + i * lines.stride] /= denom;
  }
  check_finite("softmax", *out);
  if (out->requires_grad) {
    x->ensure_grad();
    tape->record("softmax", [x, out, lines] {
      for (std::size_t l = 0; l < lines.count; ++l) {
        const std::size_t base = l * lines.step;
        S dot = 0;
        for (std::size_t i = 0; i < lines.len; ++i) {
          const std::size_t idx = base + i * lines.stride;
          dot += out->g[idx] * out->v[idx];
        }
        for (std::size_t i = 0; i < lines.len; ++i) {
          const std::size_t idx = base + i * lines.stride;
          x->g[idx] += out->v[idx] * (out->g[idx] - dot);
        }
      }
    });
  }
  return out;
}

// Row-wise layer normalization over the last dimension, then affine.
template <class S>
Var<S> layer_norm(Tape<S>* tape, const Var<S>& x, const Var<S>& gamma, const Var<S>& beta,
                  S eps = S(1e-5)) {
  const std::size_t m = x->rows(), n = x->cols();
  if (gamma->shape.size() != 1 || gamma->shape[0] != n || beta->shape != gamma->shape)
    throw ShapeError("layer_norm: gamma/beta must be [" + std::to_string(n) + "]");
  auto out = make_out(tape, x->shape, {x, gamma, beta});
  std::vector<S> inv_sigma(m), xhat(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const S* row = x->v.data() + i * n;
    S mu = 0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= S(n);
    S var = 0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= S(n);
    const S is = S(1) / std::sqrt(var + eps);
    inv_sigma[i] = is;
    for (std::size_t j = 0; j < n; ++j) {
      const S xh = (row[j] - mu) * is;
      xhat[i * n + j] = xh;
      out->v[i * n + j] = gamma->v[j] * xh + beta->v[j];
    }
  }
  check_finite("layer_norm", *out);
  if (out->requires_grad) {
    if (x->requires_grad) x->ensure_grad();
    if (gamma->requires_grad) gamma->ensure_grad();
    if (beta->requires_grad) beta->ensure_grad();
    tape->record("layer_norm", [x, gamma, beta, out, m, n, inv_sigma = std::move(inv_sigma),
                                xhat = std::move(xhat)] {
      for (std::size_t i = 0; i < m; ++i) {
        const S* go = out->g.data() + i * n;
        const S* xh = xhat.data() + i * n;
        if (gamma->requires_grad)
          for (std::size_t j = 0; j < n; ++j) gamma->g[j] += go[j] * xh[j];
        if (beta->requires_grad)
          for (std::size_t j = 0; j < n; ++j) beta->g[j] += go[j];
        if (x->requires_grad) {
          S sum_dxhat = 0, sum_dxhat_xhat = 0;
          for (std::size_t j = 0; j < n; ++j) {
            const S dxh = go[j] * gamma->v[j];
            sum_dxhat += dxh;
            sum_dxhat_xhat += dxh * xh[j];
          }
          const S is = inv_sigma[i];
          for (std::size_t j = 0; j < n; ++j) {
            const S dxh = go[j] * gamma->v[j];
            x->g[i * n + j] +=
                is * (dxh - sum_dxhat / S(n) - xh[j] * sum_dxhat_xhat / S(n));
          }
        }
      }
    });
  }
  return out;
}

// Mean negative log-softmax of target ids over non-pad positions.
// logits: [T x V]; targets: T ids; positions with target == pad_id are
// excluded from the mean. With smoothing s the target distribution becomes
// (1-s)*onehot + s/V.
template <class S>
Var<S> cross_entropy(Tape<S>* tape, const Var<S>& logits, const std::vector<int>& targets,
                     int pad_id, S smoothing = S(0)) {
  if (logits->shape.size() != 2)
    throw ShapeError("cross_entropy: logits must be rank 2");
  const std::size_t t_len = logits->shape[0], vocab = logits->shape[1];
  if (targets.size() != t_len)
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) +
                     " targets for " + std::to_string(t_len) + " rows");
  std::size_t active = 0;
  for (int id : targets) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab)
      throw IndexError("cross_entropy: target id " + std::to_string(id) +
                       " out of range for vocab " + std::to_string(vocab));
    if (id != pad_id) ++active;
  }
  if (active == 0) throw ContractError("cross_entropy: every position is padding");

  auto out = make_out(tape, {1}, {logits});
  std::vector<S> probs(t_len * vocab, S(0));
  const S on = S(1) - smoothing;
  const S off = smoothing / S(vocab);
  S total = 0;
  for (std::size_t t = 0; t < t_len; ++t) {
    if (targets[t] == pad_id) continue;
    const S* row = logits->v.data() + t * vocab;
    S mx = row[0];
    for (std::size_t j = 1; j < vocab; ++j) mx = std::max(mx, row[j]);
    S denom = 0;
    for (std::size_t j = 0; j < vocab; ++j) {
      const S e = std::exp(row[j] - mx);
      probs[t * vocab + j] = e;
      denom += e;
    }
    const S log_denom = std::log(denom);
    for (std::size_t j = 0; j < vocab; ++j) probs[t * vocab + j] /= denom;
    total += -on * (row[static_cast<std::size_t>(targets[t])] - mx - log_denom);
    if (smoothing > S(0))
      for (std::size_t j = 0; j < vocab; ++j) total += -off * (row[j] - mx - log_denom);
  }
  out->v[0] = total / S(active);
  check_finite("cross_entropy", *out);
  if (out->requires_grad) {
    logits->ensure_grad();
    tape->record("cross_entropy",
                 [logits, out, targets, pad_id, t_len, vocab, active, on, off, smoothing,
                  probs = std::move(probs)] {
                   const S go = out->g[0] / S(active);
                   for (std::size_t t = 0; t < t_len; ++t) {
                     if (targets[t] == pad_id) continue;
                     S* grow = logits->g.data() + t * vocab;
                     const S* prow = probs.data() + t * vocab;
                     for (std::size_t j = 0; j < vocab; ++j)
                       grow[j] += go * (prow[j] - off);
                     grow[static_cast<std::size_t>(targets[t])] -= go * on;
                   }
                 });
  }
  return out;
}

template <class S>
Var<S> transpose(Tape<S>* tape, const Var<S>& x) {
  if (x->shape.size() != 2) throw ShapeError("transpose: rank-2 only");
  const std::size_t m = x->shape[0], n = x->shape[1];
  auto out = make_out(tape, {n, m}, {x});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out->v[j * m + i] = x->v[i * n + j];
  if (out->requires_grad) {
    x->ensure_grad();
    tape->record("transpose", [x, out, m, n] {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) x->g[i * n + j] += out->g[j * m + i];
    });
  }
  return out;
}

template <class S>
Var<S> slice_cols(Tape<S>* tape, const Var<S>& x, std::size_t c0, std::size_t width) {
  const std::size_t m = x->rows(), n = x->cols();
  if (c0 + width > n) throw ShapeError("slice_cols: slice exceeds width");
  auto out = make_out(tape, {m, width}, {x});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < width; ++j) out->v[i * width + j] = x->v[i * n + c0 + j];
  if (out->requires_grad) {
    x->ensure_grad();
    tape->record("slice_cols", [x, out, m, n, c0, width] {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < width; ++j)
          x->g[i * n + c0 + j] += out->g[i * width + j];
    });
  }
  return out;
}

template <class S>
Var<S> concat_cols(Tape<S>* tape, const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t m = parts[0]->rows();
  std::size_t total = 0;
  bool needs = false;
  for (const auto& p : parts) {
    if (p->rows() != m) throw ShapeError("concat_cols: row mismatch");
    total += p->cols();
    needs = needs || p->requires_grad;
  }
  auto out = make_var<S>({m, total}, tape && needs);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t w = p->cols();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) out->v[i * total + off + j] = p->v[i * w + j];
    off += w;
  }
  if (out->requires_grad) {
    for (const auto& p : parts)
      if (p->requires_grad) p->ensure_grad();
    tape->record("concat_cols", [parts, out, m, total] {
      std::size_t off2 = 0;
      for (const auto& p : parts) {
        const std::size_t w = p->cols();
        if (p->requires_grad)
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < w; ++j)
              p->g[i * w + j] += out->g[i * total + off2 + j];
        off2 += w;
      }
    });
  }
  return out;
}

// Gather rows of an embedding table; backward scatter-adds.
template <class S>
Var<S> embed_rows(Tape<S>* tape, const Var<S>& table, const std::vector<int>& ids) {
  if (table->shape.size() != 2) throw ShapeError("embed_rows: table must be rank 2");
  const std::size_t vocab = table->shape[0], dim = table->shape[1];
  for (int id : ids)
    if (id < 0 || static_cast<std::size_t>(id) >= vocab)
      throw IndexError("embed_rows: id " + std::to_string(id) + " out of range");
  auto out = make_out(tape, {ids.size(), dim}, {table});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const S* row = table->v.data() + static_cast<std::size_t>(ids[i]) * dim;
    std::copy(row, row + dim, out->v.data() + i * dim);
  }
  check_finite("embed_rows", *out);
  if (out->requires_grad) {
    table->ensure_grad();
    tape->record("embed_rows", [table, out, ids, dim] {
      for (std::size_t i = 0; i < ids.size(); ++i) {
        S* grow = table->g.data() + static_cast<std::size_t>(ids[i]) * dim;
        const S* go = out->g.data() + i * dim;
        for (std::size_t j = 0; j < dim; ++j) grow[j] += go[j];
      }
    });
  }
  return out;
}

// Inverted dropout: keeps with probability (1-rate) and scales by 1/(1-rate).
// The mask stream always consumes exactly numel draws from `rng`.
template <class S>
Var<S> dropout(Tape<S>* tape, const Var<S>& x, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ContractError("dropout: rate must be in [0,1)");
  if (rate == 0.0) return x;
  const S keep = S(1.0 - rate);
  std::vector<S> mask(x->v.size());
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask[i] = rng.next_double() < 1.0 - rate ? S(1) / keep : S(0);
  auto out = make_out(tape, x->shape, {x});
  for (std::size_t i = 0; i < out->v.size(); ++i) out->v[i] = x->v[i] * mask[i];
  check_finite("dropout", *out);
  if (out->requires_grad) {
    x->ensure_grad();
    tape->record("dropout", [x, out, mask = std::move(mask)] {
      for (std::size_t i = 0; i < out->v.size(); ++i) x->g[i] += out->g[i] * mask[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// parameters
// ---------------------------------------------------------------------------

template <class S>
struct Parameter {
  std::string path;
  Var<S> var;
};

// Parameters keyed by hierarchical path. std::map keeps iteration order
// deterministic (sorted by path), which checkpointing and the optimizers
// rely on.
template <class S>
class ParamStore {
 public:
  Var<S>& create(const std::string& path, Shape shape) {
    auto [it, inserted] = params_.emplace(path, nullptr);
    if (!inserted) throw ContractError("parameter path already exists: " + path);
    it->second = make_var<S>(std::move(shape), true);
    return it->second;
  }

  bool contains(const std::string& path) const { return params_.count(path) != 0; }

  const Var<S>& at(const std::string& path) const {
    auto it = params_.find(path);
    if (it == params_.end()) throw ContractError("unknown parameter path: " + path);
    return it->second;
  }

  std::vector<std::string> paths() const {
    std::vector<std::string> out;
    out.reserve(params_.size());
    for (const auto& [p, _] : params_) out.push_back(p);
    return out;
  }

  std::vector<std::string> paths_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const auto& [p, _] : params_)
      if (p.rfind(prefix, 0) == 0) out.push_back(p);
    return out;
  }

  void zero_grads() {
    for (auto& [_, var] : params_) var->zero_grad();
  }

  std::size_t size() const { return params_.size(); }

  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  // Deep copy; fresh buffers, zeroed grads.
  ParamStore clone() const {
    ParamStore out;
    for (const auto& [p, var] : params_) {
      auto& v = out.create(p, var->shape);
      v->v = var->v;
    }
    return out;
  }

  void copy_values_from(const ParamStore& other) {
    for (auto& [p, var] : params_) {
      const auto& src = other.at(p);
      if (src->shape != var->shape)
        throw ShapeError("copy_values_from: shape mismatch at " + p);
      var->v = src->v;
    }
  }

 private:
  std::map<std::string, Var<S>> params_;
};

}  // namespace metamt
