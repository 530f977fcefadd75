#include "gf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "gf/error.hpp"

#ifdef GF_HAVE_OPENBLAS
#include <cblas.h>
#include <mutex>
extern "C" void openblas_set_num_threads(int);
#endif

namespace gf {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {
  for (auto d : shape_)
    if (d == 0) throw ShapeError("tensor", "zero-sized dimension in " + shape_str(shape_));
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto d : shape_)
    if (d == 0) throw ShapeError("tensor", "zero-sized dimension in " + shape_str(shape_));
  if (shape_numel(shape_) != data_.size())
    throw ShapeError("tensor", "shape " + shape_str(shape_) + " does not hold " +
                                   std::to_string(data_.size()) + " values");
}

double Tensor::item() const {
  if (data_.size() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape_));
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

const Tensor& Var::value() const { return tape->value(id); }
const Tensor& Var::grad() const { return tape->grad(id); }

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward, const char* op) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                [this](std::size_t i) { return nodes_[i].requires_grad; });
  n.inputs = std::move(inputs);
  if (n.requires_grad) n.backward = std::move(backward);
  n.op = op;
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

void Tape::backward(Var output, std::size_t lowest) {
  if (output.tape != this) throw ContractError("backward: variable belongs to another tape");
  const Node& out = nodes_.at(output.id);
  if (out.value.numel() != 1)
    throw ContractError("backward: output must be scalar, got shape " + shape_str(out.value.shape()));
  for (auto& n : nodes_) n.grad = Tensor();
  nodes_[output.id].grad = Tensor(out.value.shape(), 1.0);
  for (std::size_t id = output.id + 1; id-- > lowest;) {
    Node& n = nodes_[id];
    if (n.grad.empty() || !n.backward) continue;
    n.backward(*this, id);
  }
}

const Tensor& Tape::grad(std::size_t id) {
  Node& n = nodes_.at(id);
  if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

std::span<double> Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return {};
  if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad.data();
}

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const double* a,
          const double* b, double* c, bool accumulate) {
#ifdef GF_HAVE_OPENBLAS
  if (m * n * k >= 4096) {
    // Parallelism comes from scoring networks concurrently, not from BLAS.
    static std::once_flag once;
    std::call_once(once, [] { openblas_set_num_threads(1); });
    const auto mi = static_cast<int>(m), ni = static_cast<int>(n), ki = static_cast<int>(k);
    cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans, mi, ni, ki,
                1.0, a, trans_a ? mi : ki, b, trans_b ? ki : ni, accumulate ? 1.0 : 0.0, c, ni);
    return;
  }
#endif
  std::vector<double> at, bt;
  if (trans_a) {
    // a is stored k x m
    at.resize(m * k);
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t i = 0; i < m; ++i) at[i * k + p] = a[p * m + i];
    a = at.data();
  }
  if (trans_b) {
    // b is stored n x k
    bt.resize(k * n);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
    b = bt.data();
  }
  if (!accumulate) std::fill(c, c + m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

namespace ops {
namespace {

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError(op, "operand shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) + " differ");
}

void require_same_tape(const char* op, Var a, Var b) {
  if (a.tape != b.tape) throw ContractError(std::string(op) + ": operands live on different tapes");
}

// Elementwise unary primitive; dfdx receives (x, y) and returns dy/dx.
template <class F, class D>
Var unary(Var x, const char* op, F f, D dfdx) {
  const Tensor& xv = x.value();
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < xv.numel(); ++i) y[i] = f(xv[i]);
  const std::size_t xi = x.id;
  return x.tape->record(std::move(y), {xi},
                        [xi, dfdx](Tape& t, std::size_t self) {
                          auto gx = t.grad_buffer(xi);
                          if (gx.empty()) return;
                          const Tensor& g = t.grad_out(self);
                          const Tensor& xv = t.value(xi);
                          const Tensor& yv = t.value(self);
                          for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i] * dfdx(xv[i], yv[i]);
                        },
                        op);
}

// Elementwise binary primitive; da/db receive (a, b) and return partials.
template <class F, class DA, class DB>
Var binary(Var a, Var b, const char* op, F f, DA da, DB db) {
  require_same_tape(op, a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same(op, av, bv);
  Tensor y(av.shape());
  for (std::size_t i = 0; i < av.numel(); ++i) y[i] = f(av[i], bv[i]);
  const std::size_t ai = a.id, bi = b.id;
  return a.tape->record(std::move(y), {ai, bi},
                        [ai, bi, da, db](Tape& t, std::size_t self) {
                          const Tensor& g = t.grad_out(self);
                          const Tensor& av = t.value(ai);
                          const Tensor& bv = t.value(bi);
                          if (auto ga = t.grad_buffer(ai); !ga.empty())
                            for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * da(av[i], bv[i]);
                          if (auto gb = t.grad_buffer(bi); !gb.empty())
                            for (std::size_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * db(av[i], bv[i]);
                        },
                        op);
}

// Reduction to one value; dfdx receives (x_i, y) and returns dy/dx_i.
template <class D>
Var reduce(Var x, const char* op, double y, D dfdx) {
  const std::size_t xi = x.id;
  return x.tape->record(Tensor::scalar(y), {xi},
                        [xi, dfdx](Tape& t, std::size_t self) {
                          auto gx = t.grad_buffer(xi);
                          if (gx.empty()) return;
                          const double g = t.grad_out(self)[0];
                          const Tensor& xv = t.value(xi);
                          const double yv = t.value(self)[0];
                          const double n = static_cast<double>(xv.numel());
                          for (std::size_t i = 0; i < xv.numel(); ++i) gx[i] += g * dfdx(xv[i], yv, n);
                        },
                        op);
}

void im2col(const double* x, std::size_t c, std::size_t h, std::size_t w, std::size_t k, double* cols) {
  const long pad = static_cast<long>(k / 2);
  const long hl = static_cast<long>(h), wl = static_cast<long>(w);
  const std::size_t hw = h * w;
  if (k == 1) {
    std::copy(x, x + c * hw, cols);
    return;
  }
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t ki = 0; ki < k; ++ki)
      for (std::size_t kj = 0; kj < k; ++kj) {
        double* row = cols + ((ch * k + ki) * k + kj) * hw;
        const long dj = static_cast<long>(kj) - pad;
        // Valid output columns j satisfy 0 <= j + dj < w.
        const long j0 = std::max(0L, -dj), j1 = std::min(wl, wl - dj);
        for (long i = 0; i < hl; ++i) {
          double* out = row + i * wl;
          const long si = i + static_cast<long>(ki) - pad;
          if (si < 0 || si >= hl || j0 >= j1) {
            std::fill(out, out + wl, 0.0);
            continue;
          }
          const double* src = x + (static_cast<long>(ch) * hl + si) * wl + dj;
          std::fill(out, out + j0, 0.0);
          std::copy(src + j0, src + j1, out + j0);
          std::fill(out + j1, out + wl, 0.0);
        }
      }
}

void col2im(const double* cols, std::size_t c, std::size_t h, std::size_t w, std::size_t k, double* x) {
  const long pad = static_cast<long>(k / 2);
  const long hl = static_cast<long>(h), wl = static_cast<long>(w);
  const std::size_t hw = h * w;
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t ki = 0; ki < k; ++ki)
      for (std::size_t kj = 0; kj < k; ++kj) {
        const double* row = cols + ((ch * k + ki) * k + kj) * hw;
        const long dj = static_cast<long>(kj) - pad;
        const long j0 = std::max(0L, -dj), j1 = std::min(wl, wl - dj);
        for (long i = 0; i < hl; ++i) {
          const long si = i + static_cast<long>(ki) - pad;
          if (si < 0 || si >= hl) continue;
          const double* in = row + i * wl;
          double* dst = x + (static_cast<long>(ch) * hl + si) * wl + dj;
          for (long j = j0; j < j1; ++j) dst[j] += in[j];
        }
      }
}

}  // namespace

Var matmul(Var a, Var b) {
  require_same_tape("matmul", a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0))
    throw ShapeError("matmul", "cannot multiply " + shape_str(av.shape()) + " by " + shape_str(bv.shape()));
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor y({m, n});
  gemm(false, false, m, n, k, av.data().data(), bv.data().data(), y.data().data(), false);
  const std::size_t ai = a.id, bi = b.id;
  return a.tape->record(std::move(y), {ai, bi},
                        [ai, bi, m, n, k](Tape& t, std::size_t self) {
                          const double* g = t.grad_out(self).data().data();
                          if (auto ga = t.grad_buffer(ai); !ga.empty())
                            gemm(false, true, m, k, n, g, t.value(bi).data().data(), ga.data(), true);
                          if (auto gb = t.grad_buffer(bi); !gb.empty())
                            gemm(true, false, k, n, m, t.value(ai).data().data(), g, gb.data(), true);
                        },
                        "matmul");
}

Var conv2d(Var x, Var w) {
  require_same_tape("conv2d", x, w);
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  if (xv.rank() != 4 || wv.rank() != 4)
    throw ShapeError("conv2d", "expected rank-4 input and weight, got " + shape_str(xv.shape()) + " and " +
                                   shape_str(wv.shape()));
  const std::size_t n = xv.dim(0), c = xv.dim(1), h = xv.dim(2), wd = xv.dim(3);
  const std::size_t o = wv.dim(0), k = wv.dim(2);
  if (wv.dim(1) != c || wv.dim(3) != k || k % 2 == 0 || k > 2 * std::min(h, wd) + 1)
    throw ShapeError("conv2d", "kernel " + shape_str(wv.shape()) + " does not fit input " + shape_str(xv.shape()));
  const std::size_t hw = h * wd, ckk = c * k * k;
  Tensor y({n, o, h, wd});
  std::vector<double> cols(ckk * hw);
  for (std::size_t s = 0; s < n; ++s) {
    im2col(xv.data().data() + s * c * hw, c, h, wd, k, cols.data());
    gemm(false, false, o, hw, ckk, wv.data().data(), cols.data(), y.data().data() + s * o * hw, false);
  }
  const std::size_t xi = x.id, wi = w.id;
  return x.tape->record(
      std::move(y), {xi, wi},
      [xi, wi, n, c, h, wd, o, k, hw, ckk](Tape& t, std::size_t self) {
        const Tensor& g = t.grad_out(self);
        auto gx = t.grad_buffer(xi);
        auto gw = t.grad_buffer(wi);
        const Tensor& xv = t.value(xi);
        const Tensor& wv = t.value(wi);
        std::vector<double> cols(ckk * hw);
        for (std::size_t s = 0; s < n; ++s) {
          const double* gs = g.data().data() + s * o * hw;
          if (!gw.empty()) {
            im2col(xv.data().data() + s * c * hw, c, h, wd, k, cols.data());
            gemm(false, true, o, ckk, hw, gs, cols.data(), gw.data(), true);
          }
          if (!gx.empty()) {
            gemm(true, false, ckk, hw, o, wv.data().data(), gs, cols.data(), false);
            col2im(cols.data(), c, h, wd, k, gx.data() + s * c * hw);
          }
        }
      },
      "conv2d");
}

Var add_bias(Var x, Var b) {
  require_same_tape("add_bias", x, b);
  const Tensor& xv = x.value();
  const Tensor& bv = b.value();
  if ((xv.rank() != 2 && xv.rank() != 4) || bv.rank() != 1 || bv.dim(0) != xv.dim(1))
    throw ShapeError("add_bias", "bias " + shape_str(bv.shape()) + " does not match " + shape_str(xv.shape()));
  const std::size_t n = xv.dim(0), c = xv.dim(1), inner = xv.numel() / (n * c);
  Tensor y = xv;
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t ch = 0; ch < c; ++ch) {
      double* row = y.data().data() + (s * c + ch) * inner;
      for (std::size_t i = 0; i < inner; ++i) row[i] += bv[ch];
    }
  const std::size_t xi = x.id, bi = b.id;
  return x.tape->record(std::move(y), {xi, bi},
                        [xi, bi, n, c, inner](Tape& t, std::size_t self) {
                          const Tensor& g = t.grad_out(self);
                          if (auto gx = t.grad_buffer(xi); !gx.empty())
                            for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i];
                          if (auto gb = t.grad_buffer(bi); !gb.empty())
                            for (std::size_t s = 0; s < n; ++s)
                              for (std::size_t ch = 0; ch < c; ++ch) {
                                const double* row = g.data().data() + (s * c + ch) * inner;
                                double acc = 0.0;
                                for (std::size_t i = 0; i < inner; ++i) acc += row[i];
                                gb[ch] += acc;
                              }
                        },
                        "add_bias");
}

Var relu(Var x) {
  // relu'(0) = 0
  return unary(x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var x) {
  return unary(x, "sigmoid", [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
               [](double, double y) { return y * (1.0 - y); });
}

Var softmax(Var x) {
  const Tensor& xv = x.value();
  const std::size_t last = xv.shape().back();
  const std::size_t rows = xv.numel() / last;
  Tensor y(xv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data().data() + r * last;
    double* out = y.data().data() + r * last;
    const double mx = *std::max_element(in, in + last);
    double z = 0.0;
    for (std::size_t i = 0; i < last; ++i) z += (out[i] = std::exp(in[i] - mx));
    for (std::size_t i = 0; i < last; ++i) out[i] /= z;
  }
  const std::size_t xi = x.id;
  return x.tape->record(std::move(y), {xi},
                        [xi, rows, last](Tape& t, std::size_t self) {
                          auto gx = t.grad_buffer(xi);
                          if (gx.empty()) return;
                          const Tensor& g = t.grad_out(self);
                          const Tensor& y = t.value(self);
                          for (std::size_t r = 0; r < rows; ++r) {
                            const std::size_t o = r * last;
                            double dot = 0.0;
                            for (std::size_t i = 0; i < last; ++i) dot += g[o + i] * y[o + i];
                            for (std::size_t i = 0; i < last; ++i) gx[o + i] += y[o + i] * (g[o + i] - dot);
                          }
                        },
                        "softmax");
}

Var add(Var a, Var b) {
  return binary(a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
                [](double, double) { return 1.0; });
}

Var subtract(Var a, Var b) {
  return binary(a, b, "subtract", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
                [](double, double) { return -1.0; });
}

Var multiply(Var a, Var b) {
  return binary(a, b, "multiply", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
                [](double x, double) { return x; });
}

Var invert(Var x) {
  return unary(x, "invert", [](double v) { return 1.0 / v; }, [](double v, double) { return -1.0 / (v * v); });
}

Var abs(Var x) {
  return unary(x, "abs", [](double v) { return std::fabs(v); },
               [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Var log(Var x) {
  return unary(x, "log", [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Var square(Var x) {
  return unary(x, "square", [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Var minimum(Var a, Var b) {
  return binary(a, b, "minimum", [](double x, double y) { return std::min(x, y); },
                [](double x, double y) { return x <= y ? 1.0 : 0.0; },
                [](double x, double y) { return x <= y ? 0.0 : 1.0; });
}

Var maximum(Var a, Var b) {
  return binary(a, b, "maximum", [](double x, double y) { return std::max(x, y); },
                [](double x, double y) { return x >= y ? 1.0 : 0.0; },
                [](double x, double y) { return x >= y ? 0.0 : 1.0; });
}

Var scale(Var x, double factor) {
  return unary(x, "scale", [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return reduce(x, "sum", s, [](double, double, double) { return 1.0; });
}

Var mean(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return reduce(x, "mean", s / static_cast<double>(x.value().numel()),
                [](double, double, double n) { return 1.0 / n; });
}

Var l1_norm(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += std::fabs(v);
  return reduce(x, "l1_norm", s, [](double v, double, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Var frobenius_norm(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v * v;
  return reduce(x, "frobenius_norm", std::sqrt(s),
                [](double v, double y, double) { return y > 0.0 ? v / y : 0.0; });
}

Var transpose(Var x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2) throw ShapeError("transpose", "expected rank 2, got " + shape_str(xv.shape()));
  const std::size_t r = xv.dim(0), c = xv.dim(1);
  Tensor y({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) y[j * r + i] = xv[i * c + j];
  const std::size_t xi = x.id;
  return x.tape->record(std::move(y), {xi},
                        [xi, r, c](Tape& t, std::size_t self) {
                          auto gx = t.grad_buffer(xi);
                          if (gx.empty()) return;
                          const Tensor& g = t.grad_out(self);
                          for (std::size_t i = 0; i < r; ++i)
                            for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[j * r + i];
                        },
                        "transpose");
}

Var reshape(Var x, Shape shape) {
  const Tensor& xv = x.value();
  if (shape_numel(shape) != xv.numel())
    throw ShapeError("reshape", "cannot view " + shape_str(xv.shape()) + " as " + shape_str(shape));
  const std::size_t xi = x.id;
  return x.tape->record(xv.reshaped(std::move(shape)), {xi},
                        [xi](Tape& t, std::size_t self) {
                          auto gx = t.grad_buffer(xi);
                          if (gx.empty()) return;
                          const Tensor& g = t.grad_out(self);
                          for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i];
                        },
                        "reshape");
}

Var cross_entropy(Var logits, const std::vector<std::size_t>& labels) {
  const Tensor& lv = logits.value();
  if (lv.rank() != 2 || lv.dim(0) != labels.size())
    throw ShapeError("cross_entropy", "logits " + shape_str(lv.shape()) + " vs " + std::to_string(labels.size()) +
                                          " labels");
  const std::size_t n = lv.dim(0), c = lv.dim(1);
  for (auto l : labels)
    if (l >= c) throw ShapeError("cross_entropy", "label " + std::to_string(l) + " out of range");
  Tensor probs({n, c});
  double loss = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const double* row = lv.data().data() + s * c;
    double* p = probs.data().data() + s * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += (p[j] = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < c; ++j) p[j] /= z;
    loss += std::log(z) + mx - row[labels[s]];
  }
  loss /= static_cast<double>(n);
  const std::size_t li = logits.id;
  return logits.tape->record(Tensor::scalar(loss), {li},
                             [li, probs = std::move(probs), labels, n, c](Tape& t, std::size_t self) {
                               auto gl = t.grad_buffer(li);
                               if (gl.empty()) return;
                               const double g = t.grad_out(self)[0] / static_cast<double>(n);
                               for (std::size_t s = 0; s < n; ++s)
                                 for (std::size_t j = 0; j < c; ++j)
                                   gl[s * c + j] += g * (probs[s * c + j] - (labels[s] == j ? 1.0 : 0.0));
                             },
                             "cross_entropy");
}

Var avg_pool2d(Var x, std::size_t kernel, std::size_t stride, std::size_t padding) {
  const Tensor& xv = x.value();
  if (xv.rank() != 4 || stride == 0 || kernel == 0)
    throw ShapeError("avg_pool2d", "expected rank-4 input, got " + shape_str(xv.shape()));
  const std::size_t n = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  if (h + 2 * padding < kernel || w + 2 * padding < kernel)
    throw ShapeError("avg_pool2d", "window larger than input " + shape_str(xv.shape()));
  const std::size_t oh = (h + 2 * padding - kernel) / stride + 1;
  const std::size_t ow = (w + 2 * padding - kernel) / stride + 1;
  const double inv = 1.0 / static_cast<double>(kernel * kernel);
  // Calls fn(out, in) for every (output, input) index pair inside a clipped window.
  auto for_window = [=](auto&& fn) {
    for (std::size_t p = 0; p < n * c; ++p) {
      const std::size_t ob = p * oh * ow, ib = p * h * w;
      for (std::size_t i = 0; i < oh; ++i) {
        const long r0 = std::max(0L, static_cast<long>(i * stride) - static_cast<long>(padding));
        const long r1 = std::min(static_cast<long>(h),
                                 static_cast<long>(i * stride + kernel) - static_cast<long>(padding));
        for (std::size_t j = 0; j < ow; ++j) {
          const long c0 = std::max(0L, static_cast<long>(j * stride) - static_cast<long>(padding));
          const long c1 = std::min(static_cast<long>(w),
                                   static_cast<long>(j * stride + kernel) - static_cast<long>(padding));
          const std::size_t out = ob + i * ow + j;
          for (long r = r0; r < r1; ++r)
            for (long q = c0; q < c1; ++q) fn(out, ib + static_cast<std::size_t>(r) * w + static_cast<std::size_t>(q));
        }
      }
    }
  };
  Tensor y({n, c, oh, ow});
  {
    double* yd = y.data().data();
    const double* xd = xv.data().data();
    for_window([&](std::size_t out, std::size_t in) { yd[out] += xd[in]; });
    for (double& v : y.data()) v *= inv;
  }
  const std::size_t xi = x.id;
  return x.tape->record(std::move(y), {xi},
                        [xi, for_window, inv](Tape& t, std::size_t self) {
                          auto gx = t.grad_buffer(xi);
                          if (gx.empty()) return;
                          const double* g = t.grad_out(self).data().data();
                          double* gd = gx.data();
                          for_window([&](std::size_t out, std::size_t in) { gd[in] += g[out] * inv; });
                        },
                        "avg_pool2d");
}

Var global_avg_pool(Var x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 4) throw ShapeError("global_avg_pool", "expected rank 4, got " + shape_str(xv.shape()));
  const std::size_t n = xv.dim(0), c = xv.dim(1), hw = xv.dim(2) * xv.dim(3);
  Tensor y({n, c});
  for (std::size_t p = 0; p < n * c; ++p) {
    double s = 0.0;
    for (std::size_t i = 0; i < hw; ++i) s += xv[p * hw + i];
    y[p] = s / static_cast<double>(hw);
  }
  const std::size_t xi = x.id;
  return x.tape->record(std::move(y), {xi},
                        [xi, n, c, hw](Tape& t, std::size_t self) {
                          auto gx = t.grad_buffer(xi);
                          if (gx.empty()) return;
                          const Tensor& g = t.grad_out(self);
                          const double inv = 1.0 / static_cast<double>(hw);
                          for (std::size_t p = 0; p < n * c; ++p)
                            for (std::size_t i = 0; i < hw; ++i) gx[p * hw + i] += g[p] * inv;
                        },
                        "global_avg_pool");
}

}  // namespace ops

double gradient_check(const ScalarFn& f, const Tensor& point, double h) {
  if (!(h > 0.0)) throw ContractError("gradient_check: step must be positive");
  Tape tape;
  Var x = tape.leaf(point, true);
  Var y = f(tape, x);
  if (y.value().numel() != 1) throw ContractError("gradient_check: function is not scalar-valued");
  tape.backward(y);
  const Tensor analytic = tape.grad(x.id);

  auto eval = [&](const Tensor& p) {
    Tape t;
    return f(t, t.leaf(p, false)).value().item();
  };
  double worst = 0.0;
  Tensor probe = point;
  for (std::size_t i = 0; i < point.numel(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = eval(probe);
    probe[i] = orig - h;
    const double down = eval(probe);
    probe[i] = orig;
    const double numeric = (up - down) / (2.0 * h);
    worst = std::max(worst, std::fabs(analytic[i] - numeric) / std::max(1.0, std::fabs(numeric)));
  }
  return worst;
}

}  // namespace gf
