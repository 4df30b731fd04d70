#include "cdan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "cdan/error.hpp"

namespace cdan {

std::string Shape::str() const { return std::to_string(rows) + "x" + std::to_string(cols); }

namespace {

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.str() + " and " + b.str());
}

void require_same(const char* op, const Shape& a, const Shape& b) {
  if (!(a == b)) shape_mismatch(op, a, b);
}

void require_same_tape(Var a, Var b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) throw UsageError("operands belong to different tapes");
}

template <class F>
Tensor map(const Tensor& a, F f) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

}  // namespace

// ---- Tensor ----

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(shape.size(), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.size())
    throw ShapeError("tensor of shape " + shape_.str() + " given " + std::to_string(data_.size()) + " values");
}

Tensor Tensor::row(std::initializer_list<double> values) {
  return Tensor({1, values.size()}, std::vector<double>(values));
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged initializer: rows of width " + std::to_string(c) +
                                          " and " + std::to_string(row.size()));
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

double Tensor::item() const {
  if (size() != 1) throw UsageError("item() on tensor of shape " + shape_.str());
  return data_[0];
}

Tensor Tensor::slice_rows(std::size_t begin, std::size_t end) const {
  if (begin > end || end > rows()) throw ShapeError("row slice out of range for " + shape_.str());
  return Tensor({end - begin, cols()},
                std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(begin * cols()),
                                    data_.begin() + static_cast<std::ptrdiff_t>(end * cols())));
}

Tensor Tensor::gather_rows(std::span<const std::size_t> idx) const {
  Tensor out({idx.size(), cols()});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= rows()) throw ShapeError("row index out of range for " + shape_.str());
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(idx[i] * cols()), cols(),
                out.data_.begin() + static_cast<std::ptrdiff_t>(i * cols()));
  }
  return out;
}

// ---- Var / Tape ----

const Tensor& Var::value() const { return tape_->node(*this).value; }
const Tensor& Var::grad() const { return tape_->node(*this).grad; }
bool Var::requires_grad() const { return tape_->node(*this).requires_grad; }

const Tape::Node& Tape::node(Var v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) throw UsageError("stale or foreign tape handle");
  return nodes_[v.id_];
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::variable(Tensor value) {
  Node n;
  n.grad = Tensor(value.shape());
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::parameter(Parameter& p) {
  Var v = variable(p.value);
  nodes_[v.id_].param = &p;
  return v;
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  Node n;
  for (Var in : inputs) n.requires_grad = n.requires_grad || node(in).requires_grad;
  if (n.requires_grad) {
    n.grad = Tensor(value.shape());
    n.backward = std::move(backward);
  }
  n.value = std::move(value);
  return push(std::move(n));
}

Tensor* Tape::grad_buffer(Var v) {
  node(v);
  Node& n = nodes_[v.id_];
  return n.requires_grad ? &n.grad : nullptr;
}

void Tape::accumulate(Var v, const Tensor& delta) {
  Tensor* g = grad_buffer(v);
  if (g == nullptr) return;
  require_same("accumulate", g->shape(), delta.shape());
  for (std::size_t i = 0; i < delta.size(); ++i) (*g)[i] += delta[i];
}

void Tape::backward(Var loss) {
  const Node& root = node(loss);
  if (root.value.size() != 1) throw UsageError("backward requires a scalar loss, got " + root.value.shape().str());
  if (consumed_) throw UsageError("backward called twice on the same tape without reset()");
  consumed_ = true;
  if (!root.requires_grad) return;
  nodes_[loss.id_].grad[0] = 1.0;
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad) continue;
    if (n.backward) {
      // Copy so the callback may touch nodes_ freely.
      const Tensor g = n.grad;
      n.backward(*this, g);
    }
    if (n.param != nullptr) {
      Tensor& pg = n.param->grad;
      if (!(pg.shape() == n.grad.shape())) pg = Tensor(n.grad.shape());
      for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += n.grad[k];
    }
  }
}

void Tape::reset() {
  nodes_.clear();
  consumed_ = false;
}

// ---- plain helpers ----

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_mismatch("matmul", a.shape(), b.shape());
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor c({m, n});
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* pc = c.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = pc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      if (av == 0.0) continue;
      const double* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

Tensor transpose(const Tensor& a) {
  Tensor t({a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

Tensor softmax_rows(const Tensor& a) {
  Tensor out(a.shape());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto in = a.row_span(r);
    auto o = out.row_span(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) z += (o[j] = std::exp(in[j] - mx));
    for (double& v : o) v /= z;
  }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot: lengths " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// ---- differentiable ops ----

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  Tape& t = *a.tape();
  return t.record(matmul(a.value(), b.value()), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
    if (Tensor* ga = tape.grad_buffer(a)) {
      // dA = G * B^T
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += g(i, j) * bv(p, j);
          (*ga)(i, p) += s;
        }
    }
    if (Tensor* gb = tape.grad_buffer(b)) {
      // dB = A^T * G
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double av_ip = av(i, p);
          if (av_ip == 0.0) continue;
          auto grow = g.row_span(i);
          auto out = gb->row_span(p);
          for (std::size_t j = 0; j < n; ++j) out[j] += av_ip * grow[j];
        }
    }
  });
}

Var add(Var a, Var b) {
  require_same_tape(a, b);
  require_same("add", a.shape(), b.shape());
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    tape.accumulate(a, g);
    tape.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  require_same_tape(a, b);
  require_same("sub", a.shape(), b.shape());
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    tape.accumulate(a, g);
    if (Tensor* gb = tape.grad_buffer(b))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
  });
}

Var mul(Var a, Var b) {
  require_same_tape(a, b);
  require_same("mul", a.shape(), b.shape());
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    if (Tensor* ga = tape.grad_buffer(a))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * b.value()[i];
    if (Tensor* gb = tape.grad_buffer(b))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * a.value()[i];
  });
}

Var div(Var a, Var b) {
  require_same_tape(a, b);
  require_same("div", a.shape(), b.shape());
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= b.value()[i];
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    const Tensor& bv = b.value();
    if (Tensor* ga = tape.grad_buffer(a))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] / bv[i];
    if (Tensor* gb = tape.grad_buffer(b))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i] * a.value()[i] / (bv[i] * bv[i]);
  });
}

Var add_bias(Var a, Var bias) {
  require_same_tape(a, bias);
  if (bias.shape().rows != 1 || bias.shape().cols != a.shape().cols) shape_mismatch("add_bias", a.shape(), bias.shape());
  Tensor out = a.value();
  const Tensor& bv = bias.value();
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bv[c];
  return a.tape()->record(std::move(out), {a, bias}, [a, bias](Tape& tape, const Tensor& g) {
    tape.accumulate(a, g);
    if (Tensor* gb = tape.grad_buffer(bias))
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) (*gb)[c] += g(r, c);
  });
}

Var relu(Var a) {
  return a.tape()->record(map(a.value(), [](double v) { return v > 0.0 ? v : 0.0; }), {a},
                          [a](Tape& tape, const Tensor& g) {
                            Tensor* ga = tape.grad_buffer(a);
                            for (std::size_t i = 0; i < g.size(); ++i)
                              if (a.value()[i] > 0.0) (*ga)[i] += g[i];
                          });
}

Var sigmoid(Var a) {
  Tensor out = map(a.value(), [](double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
  Tensor saved = out;
  return a.tape()->record(std::move(out), {a}, [a, s = std::move(saved)](Tape& tape, const Tensor& g) {
    Tensor* ga = tape.grad_buffer(a);
    for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * s[i] * (1.0 - s[i]);
  });
}

Var softplus(Var a) {
  Tensor out = map(a.value(), [](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); });
  return a.tape()->record(std::move(out), {a}, [a](Tape& tape, const Tensor& g) {
    Tensor* ga = tape.grad_buffer(a);
    const Tensor& av = a.value();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = av[i];
      const double s = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
      (*ga)[i] += g[i] * s;
    }
  });
}

Var exp(Var a) {
  Tensor out = map(a.value(), [](double v) { return std::exp(v); });
  Tensor saved = out;
  return a.tape()->record(std::move(out), {a}, [a, saved = std::move(saved)](Tape& tape, const Tensor& g) {
    Tensor* ga = tape.grad_buffer(a);
    for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * saved[i];
  });
}

Var log(Var a) {
  return a.tape()->record(map(a.value(), [](double v) { return std::log(std::max(v, kLogFloor)); }), {a},
                          [a](Tape& tape, const Tensor& g) {
                            Tensor* ga = tape.grad_buffer(a);
                            const Tensor& av = a.value();
                            for (std::size_t i = 0; i < g.size(); ++i)
                              if (av[i] >= kLogFloor) (*ga)[i] += g[i] / av[i];
                          });
}

Var softmax_rows(Var a) {
  Tensor out = softmax_rows(a.value());
  Tensor saved = out;
  return a.tape()->record(std::move(out), {a}, [a, s = std::move(saved)](Tape& tape, const Tensor& g) {
    Tensor* ga = tape.grad_buffer(a);
    for (std::size_t r = 0; r < s.rows(); ++r) {
      auto sr = s.row_span(r);
      auto gr = g.row_span(r);
      const double inner = dot(sr, gr);
      auto out = ga->row_span(r);
      for (std::size_t j = 0; j < sr.size(); ++j) out[j] += sr[j] * (gr[j] - inner);
    }
  });
}

Var scale(Var a, double c) {
  return a.tape()->record(map(a.value(), [c](double v) { return v * c; }), {a}, [a, c](Tape& tape, const Tensor& g) {
    Tensor* ga = tape.grad_buffer(a);
    for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += c * g[i];
  });
}

Var add_scalar(Var a, double c) {
  return a.tape()->record(map(a.value(), [c](double v) { return v + c; }), {a},
                          [a](Tape& tape, const Tensor& g) { tape.accumulate(a, g); });
}

Var concat(Var a, Var b, int axis) {
  require_same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (axis == 0) {
    if (av.cols() != bv.cols()) shape_mismatch("concat(axis=0)", av.shape(), bv.shape());
    std::vector<double> data(av.values());
    data.insert(data.end(), bv.values().begin(), bv.values().end());
    Tensor out({av.rows() + bv.rows(), av.cols()}, std::move(data));
    const std::size_t split = av.rows();
    return a.tape()->record(std::move(out), {a, b}, [a, b, split](Tape& tape, const Tensor& g) {
      tape.accumulate(a, g.slice_rows(0, split));
      tape.accumulate(b, g.slice_rows(split, g.rows()));
    });
  }
  if (axis == 1) {
    // A single row of length n is treated like a 1 x n tensor, so joining
    // two rows along axis 1 is the flat concatenation f (+) g.
    if (av.rows() != bv.rows()) shape_mismatch("concat(axis=1)", av.shape(), bv.shape());
    const std::size_t ca = av.cols(), cb = bv.cols();
    Tensor out({av.rows(), ca + cb});
    for (std::size_t r = 0; r < av.rows(); ++r) {
      std::copy_n(av.row_span(r).begin(), ca, out.row_span(r).begin());
      std::copy_n(bv.row_span(r).begin(), cb, out.row_span(r).begin() + static_cast<std::ptrdiff_t>(ca));
    }
    return a.tape()->record(std::move(out), {a, b}, [a, b, ca, cb](Tape& tape, const Tensor& g) {
      if (Tensor* ga = tape.grad_buffer(a))
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < ca; ++c) (*ga)(r, c) += g(r, c);
      if (Tensor* gb = tape.grad_buffer(b))
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < cb; ++c) (*gb)(r, c) += g(r, ca + c);
    });
  }
  throw UsageError("concat: axis must be 0 or 1, got " + std::to_string(axis));
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return a.tape()->record(Tensor::scalar(s), {a}, [a](Tape& tape, const Tensor& g) {
    Tensor* ga = tape.grad_buffer(a);
    for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += g[0];
  });
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var sum_cols(Var a) {
  const Tensor& av = a.value();
  Tensor out({av.rows(), 1});
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (double v : av.row_span(r)) out[r] += v;
  return a.tape()->record(std::move(out), {a}, [a](Tape& tape, const Tensor& g) {
    Tensor* ga = tape.grad_buffer(a);
    for (std::size_t r = 0; r < ga->rows(); ++r)
      for (double& v : ga->row_span(r)) v += g[r];
  });
}

Var gradient_reversal(Var a, double coeff) {
  if (!(coeff >= 0.0)) throw UsageError("gradient_reversal: coefficient must be nonnegative");
  return a.tape()->record(a.value(), {a}, [a, coeff](Tape& tape, const Tensor& g) {
    Tensor* ga = tape.grad_buffer(a);
    for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] -= coeff * g[i];
  });
}

}  // namespace cdan
