#pragma once

// Dense row-major matrices of doubles and a reverse-mode tape over them.
//
// Everything in this library is at most rank 2: a batch of rows. Single rows
// are 1 x n tensors and scalars are 1 x 1.

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace cdan {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const noexcept { return rows * cols; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor row(std::initializer_list<double> values);
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor scalar(double v) { return Tensor({1, 1}, v); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rows() const noexcept { return shape_.rows; }
  std::size_t cols() const noexcept { return shape_.cols; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_.cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_.cols + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> row_span(std::size_t r) { return {data_.data() + r * shape_.cols, shape_.cols}; }
  std::span<const double> row_span(std::size_t r) const {
    return {data_.data() + r * shape_.cols, shape_.cols};
  }
  const std::vector<double>& values() const noexcept { return data_; }

  // Scalar value of a 1 x 1 tensor.
  double item() const;

  // Rows [begin, end) as a new tensor.
  Tensor slice_rows(std::size_t begin, std::size_t end) const;
  // Rows picked by index, in the given order.
  Tensor gather_rows(std::span<const std::size_t> idx) const;

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// A trainable leaf. The tape accumulates into `grad` on backward.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}
  void zero_grad() { grad = Tensor(value.shape()); }
};

class Tape;

// Handle to a node recorded on a tape. Cheap to copy; valid until the tape
// is reset.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  // Gradient after backward. Zero-filled when the node was not reached.
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }

 private:
  friend class Tape;
  Var(Tape* t, std::size_t id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Records operations in creation order, which is a topological order, and
// replays them backwards once. Not thread-safe; confine a tape to one thread.
class Tape {
 public:
  // Called once during backward with the output gradient. Implementations
  // push input gradients through Tape::accumulate.
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var variable(Tensor value);
  // Leaf bound to a parameter; its gradient is added to p.grad on backward.
  Var parameter(Parameter& p);

  // Records an op. The backward function is dropped when no input requires
  // a gradient.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);

  // Adds delta into v's gradient buffer if v requires a gradient.
  void accumulate(Var v, const Tensor& delta);
  // Gradient buffer of v for in-place accumulation, or nullptr when v does
  // not require a gradient.
  Tensor* grad_buffer(Var v);

  // Propagates d(loss)/d(node) to every node. Throws UsageError for a
  // non-scalar loss or a second call without reset().
  void backward(Var loss);
  void reset();

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  friend class Var;
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter* param = nullptr;
  };
  Var push(Node node);
  const Node& node(Var v) const;

  std::deque<Node> nodes_;  // value() references must survive later records
  bool consumed_ = false;
};

// ---- differentiable operations ----

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
// a (n x m) plus a 1 x m row added to every row.
Var add_bias(Var a, Var bias);
Var relu(Var a);
Var sigmoid(Var a);
// log(1 + e^a), evaluated without overflow; gradient sigmoid(a).
Var softplus(Var a);
Var exp(Var a);
// Natural log of max(a, kLogFloor). The gradient is zero where clamped.
Var log(Var a);
// Row-wise softmax with max subtraction.
Var softmax_rows(Var a);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
// axis 0 stacks rows, axis 1 joins columns.
Var concat(Var a, Var b, int axis);
Var sum(Var a);
Var mean(Var a);
// n x m -> n x 1.
Var sum_cols(Var a);
// Identity forward; backward multiplies the incoming gradient by -coeff.
Var gradient_reversal(Var a, double coeff);

inline constexpr double kLogFloor = 1e-12;

// ---- plain tensor helpers ----

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor softmax_rows(const Tensor& a);
double dot(std::span<const double> a, std::span<const double> b);

}  // namespace cdan
