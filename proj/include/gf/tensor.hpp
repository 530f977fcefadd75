#pragma once

// Dense float64 tensors and a Wengert-list tape for reverse-mode
// differentiation. Shapes never broadcast: every binary primitive requires
// equal shapes, except the explicit bias/pooling helpers.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace gf {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value) { return Tensor({1}, std::vector<double>{value}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Value of a one-element tensor.
  double item() const;

  Tensor reshaped(Shape shape) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

class Tape;

// Handle to one node on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }
};

class Tape {
 public:
  // Propagates the gradient stored on `self` into its inputs.
  using BackwardFn = std::function<void(Tape& tape, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = false);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  // Records a primitive output. The node requires grad iff any input does.
  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward, const char* op);

  // Reverse sweep from a one-element output. Gradients from any earlier sweep
  // are cleared first, so repeated sweeps are bit-identical. Nodes with id
  // below `lowest` are not visited.
  void backward(Var output, std::size_t lowest = 0);

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  // Gradient after the last sweep; an all-zero tensor if the node received none.
  const Tensor& grad(std::size_t id);
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  const char* op(std::size_t id) const { return nodes_.at(id).op; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_.at(id).inputs; }
  std::size_t size() const { return nodes_.size(); }

  // For backward rules: the upstream gradient and an accumulation buffer.
  const Tensor& grad_out(std::size_t id) const { return nodes_[id].grad; }
  std::span<double> grad_buffer(std::size_t id);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    const char* op = "leaf";
  };
  std::vector<Node> nodes_;
};

// Row-major C = op(A) * op(B) (+ C when accumulate). A is m x k after op, B is k x n.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, const double* b, double* c, bool accumulate);

namespace ops {

Var matmul(Var a, Var b);
// x: [N, C, H, W]; w: [O, C, k, k] with odd k; stride 1, zero padding k/2.
Var conv2d(Var x, Var w);
// Adds b[c] along axis 1 of a rank-2 or rank-4 x.
Var add_bias(Var x, Var b);
Var relu(Var x);
Var sigmoid(Var x);
Var softmax(Var x);  // along the last axis
Var add(Var a, Var b);
Var subtract(Var a, Var b);
Var multiply(Var a, Var b);
Var invert(Var x);
Var abs(Var x);
Var log(Var x);
Var square(Var x);
Var minimum(Var a, Var b);
Var maximum(Var a, Var b);
Var scale(Var x, double factor);
Var sum(Var x);
Var mean(Var x);
Var transpose(Var x);
Var reshape(Var x, Shape shape);
Var l1_norm(Var x);
Var frobenius_norm(Var x);
// Mean cross-entropy of logits [N, C] against class indices.
Var cross_entropy(Var logits, const std::vector<std::size_t>& labels);
// x: [N, C, H, W]; window k, given stride and zero padding; divides by k*k.
Var avg_pool2d(Var x, std::size_t kernel, std::size_t stride, std::size_t padding);
// [N, C, H, W] -> [N, C]
Var global_avg_pool(Var x);

}  // namespace ops

// Scalar function of one tensor, built on a fresh tape.
using ScalarFn = std::function<Var(Tape&, Var)>;

// Max over coordinates of |analytic - central difference| / max(1, |numeric|).
double gradient_check(const ScalarFn& f, const Tensor& point, double h = 1e-5);

}  // namespace gf
