#include "gf/formula.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <limits>

#include "gf/error.hpp"
#include "gf/linalg.hpp"
#include "gf/rng.hpp"

namespace gf {

namespace {

constexpr std::array<FormulaOpInfo, 29> kOps = {{
    {"abs", 1, 1},
    {"log", 1, 1},
    {"relu", 1, 1},
    {"sigmoid", 1, 1},
    {"heaviside", 1, 1},
    {"less_than_zero", 1, 1},
    {"power", 1, 1},
    {"element_wise_invert", 1, 1},
    {"normalize", 1, 1},
    {"softmax", 1, 1},
    {"ones_like", 1, 1},
    {"gaussian_init", 1, 1},
    {"transpose", 1, 1},
    {"sum", 1, 2},
    {"numel", 1, 1},
    {"l1_norm", 1, 1},
    {"frobenius_norm", 1, 1},
    {"normalized_sum", 1, 1},
    {"determinant", 1, 1},
    {"subtract", 2, 2},
    {"element_wise_product", 2, 2},
    {"min", 2, 2},
    {"max", 2, 2},
    {"greater_than", 2, 2},
    {"less_than", 2, 2},
    {"equal", 2, 2},
    {"cosine_similarity", 2, 2},
    {"kl_div", 2, 2},
    {"mat_mul", 2, 2},
}};

constexpr double kTiny = 1e-12;

}  // namespace

const FormulaOpInfo& op_info(FormulaOp op) { return kOps[static_cast<std::size_t>(op)]; }

FormulaExpr FormulaExpr::leaf(Stat s) {
  FormulaExpr e;
  e.kind = Kind::Stat;
  e.stat = s;
  return e;
}

FormulaExpr FormulaExpr::unary(FormulaOp op, FormulaExpr a) {
  FormulaExpr e;
  e.kind = Kind::Unary;
  e.op = op;
  e.args.push_back(std::move(a));
  return e;
}

FormulaExpr FormulaExpr::binary(FormulaOp op, FormulaExpr a, FormulaExpr b) {
  FormulaExpr e;
  e.kind = Kind::Binary;
  e.op = op;
  e.args.push_back(std::move(a));
  e.args.push_back(std::move(b));
  return e;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  FormulaExpr parse() {
    skip_ws();
    if (pos_ == text_.size()) throw ParseError("empty formula", 0);
    FormulaExpr e = expr();
    skip_ws();
    if (pos_ != text_.size()) throw ParseError("unexpected trailing input", pos_);
    return e;
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool peek(char c) {
    skip_ws();
    return pos_ < text_.size() && text_[pos_] == c;
  }

  void expect(char c, const char* context) {
    skip_ws();
    if (pos_ >= text_.size())
      throw ParseError(std::string("unbalanced parentheses: expected '") + c + "' " + context, pos_);
    if (text_[pos_] != c) throw ParseError(std::string("expected '") + c + "' " + context, pos_);
    ++pos_;
  }

  FormulaExpr expr() {
    skip_ws();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of formula", pos_);
    if (text_[pos_] == '(') {
      ++pos_;
      FormulaExpr inner = expr();
      expect(')', "to close parenthesized expression");
      return inner;
    }
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
    if (pos_ == start) throw ParseError(std::string("unexpected character '") + text_[pos_] + "'", pos_);
    const std::string_view ident = text_.substr(start, pos_ - start);

    if (!peek('(')) {
      if (auto s = stat_from_name(ident)) return FormulaExpr::leaf(*s);
      throw ParseError("unknown identifier '" + std::string(ident) + "'", start);
    }
    const auto it = std::find_if(kOps.begin(), kOps.end(), [&](const FormulaOpInfo& o) { return o.name == ident; });
    if (it == kOps.end()) throw ParseError("unknown operator '" + std::string(ident) + "'", start);
    const auto op = static_cast<FormulaOp>(it - kOps.begin());
    expect('(', "after operator");
    std::vector<FormulaExpr> args;
    args.push_back(expr());
    while (peek(',')) {
      ++pos_;
      args.push_back(expr());
    }
    const std::size_t close = pos_;
    expect(')', "to close argument list");
    const int n = static_cast<int>(args.size());
    if (n < it->min_arity || n > it->max_arity)
      throw ParseError("operator '" + std::string(ident) + "' takes " + std::to_string(it->min_arity) +
                           (it->max_arity != it->min_arity ? " or " + std::to_string(it->max_arity) : "") +
                           " argument(s), got " + std::to_string(n),
                       close);
    return n == 1 ? FormulaExpr::unary(op, std::move(args[0]))
                  : FormulaExpr::binary(op, std::move(args[0]), std::move(args[1]));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

void print_to(const FormulaExpr& e, std::string& out) {
  if (e.kind == FormulaExpr::Kind::Stat) {
    out += stat_name(e.stat);
    return;
  }
  out += op_info(e.op).name;
  out += '(';
  for (std::size_t i = 0; i < e.args.size(); ++i) {
    if (i) out += ", ";
    print_to(e.args[i], out);
  }
  out += ')';
}

}  // namespace

FormulaExpr parse_formula(std::string_view text) { return Parser(text).parse(); }

std::string pretty_print(const FormulaExpr& expr) {
  std::string out;
  print_to(expr, out);
  return out;
}

StatSet referenced_stats(const FormulaExpr& e) {
  StatSet s;
  if (e.kind == FormulaExpr::Kind::Stat) s.set(static_cast<std::size_t>(e.stat));
  for (const auto& a : e.args) s |= referenced_stats(a);
  return s;
}

std::size_t node_count(const FormulaExpr& e) {
  std::size_t n = 1;
  for (const auto& a : e.args) n += node_count(a);
  return n;
}

// ---------------------------------------------------------------------------
// Operator semantics

namespace formula_ops {

Tensor flatten_2d(const Tensor& t) {
  if (t.rank() >= 2) return t.reshaped({t.dim(0), t.numel() / t.dim(0)});
  return t.reshaped({1, t.numel()});
}

std::pair<Tensor, Tensor> align(const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return {a, b};
  const std::size_t n = std::min(a.numel(), b.numel());
  std::vector<double> av(a.data().begin(), a.data().begin() + static_cast<long>(n));
  std::vector<double> bv(b.data().begin(), b.data().begin() + static_cast<long>(n));
  return {Tensor({n}, std::move(av)), Tensor({n}, std::move(bv))};
}

namespace {

template <class F>
Tensor map(const Tensor& x, F f) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) y[i] = f(x[i]);
  return y;
}

template <class F>
Tensor zip(const Tensor& a, const Tensor& b, F f) {
  auto [x, y] = align(a, b);
  Tensor z(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) z[i] = f(x[i], y[i]);
  return z;
}

double total(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return s;
}

Tensor softmax_flat(const Tensor& x) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : x.data()) mx = std::max(mx, v);
  Tensor y(x.shape());
  double z = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) z += (y[i] = std::exp(x[i] - mx));
  for (double& v : y.data()) v /= z;
  return y;
}

double indicator(bool b) { return b ? 1.0 : 0.0; }

}  // namespace

Tensor apply_unary(FormulaOp op, const Tensor& x, std::uint64_t gaussian_seed) {
  switch (op) {
    case FormulaOp::Abs: return map(x, [](double v) { return std::fabs(v); });
    case FormulaOp::Log: return map(x, [](double v) { return std::log(std::fabs(v) + kTiny); });
    case FormulaOp::Relu: return map(x, [](double v) { return v > 0.0 ? v : 0.0; });
    case FormulaOp::Sigmoid: return map(x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    case FormulaOp::Heaviside: return map(x, [](double v) { return indicator(v > 0.0); });
    case FormulaOp::LessThanZero: return map(x, [](double v) { return indicator(v < 0.0); });
    case FormulaOp::Power: return map(x, [](double v) { return v * v; });
    case FormulaOp::ElementWiseInvert:
      return map(x, [](double v) { return 1.0 / (v + (v < 0.0 ? -kTiny : kTiny)); });
    case FormulaOp::Normalize: {
      const double n = static_cast<double>(x.numel());
      const double mean = total(x) / n;
      double var = 0.0;
      for (double v : x.data()) var += (v - mean) * (v - mean);
      const double sd = std::sqrt(var / n);
      return map(x, [=](double v) { return (v - mean) / (sd + kTiny); });
    }
    case FormulaOp::Softmax: return softmax_flat(x);
    case FormulaOp::OnesLike: return Tensor(x.shape(), 1.0);
    case FormulaOp::GaussianInit: {
      Rng rng(gaussian_seed);
      std::normal_distribution<double> normal;
      Tensor y(x.shape());
      for (double& v : y.data()) v = normal(rng);
      return y;
    }
    case FormulaOp::Transpose: {
      const Tensor m = flatten_2d(x);
      const std::size_t r = m.dim(0), c = m.dim(1);
      Tensor y({c, r});
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) y[j * r + i] = m[i * c + j];
      return y;
    }
    case FormulaOp::Sum: return Tensor::scalar(total(x));
    case FormulaOp::Numel: return Tensor::scalar(static_cast<double>(x.numel()));
    case FormulaOp::L1Norm: {
      double s = 0.0;
      for (double v : x.data()) s += std::fabs(v);
      return Tensor::scalar(s);
    }
    case FormulaOp::FrobeniusNorm: {
      double s = 0.0;
      for (double v : x.data()) s += v * v;
      return Tensor::scalar(std::sqrt(s));
    }
    case FormulaOp::NormalizedSum: return Tensor::scalar(total(x) / static_cast<double>(x.numel()));
    case FormulaOp::Determinant: {
      const Tensor m = flatten_2d(x);
      linalg::Matrix a(m.dim(0), m.dim(1));
      a.data.assign(m.data().begin(), m.data().end());
      return Tensor::scalar(linalg::slogdet(linalg::gram(a)).logabsdet);
    }
    default: break;
  }
  throw ContractError("operator '" + std::string(op_info(op).name) + "' is not unary");
}

Tensor apply_binary(FormulaOp op, const Tensor& a, const Tensor& b) {
  switch (op) {
    case FormulaOp::Sum: return zip(a, b, [](double x, double y) { return x + y; });
    case FormulaOp::Subtract: return zip(a, b, [](double x, double y) { return x - y; });
    case FormulaOp::ElementWiseProduct: return zip(a, b, [](double x, double y) { return x * y; });
    case FormulaOp::Min: return zip(a, b, [](double x, double y) { return std::min(x, y); });
    case FormulaOp::Max: return zip(a, b, [](double x, double y) { return std::max(x, y); });
    case FormulaOp::GreaterThan: return zip(a, b, [](double x, double y) { return indicator(x > y); });
    case FormulaOp::LessThan: return zip(a, b, [](double x, double y) { return indicator(x < y); });
    case FormulaOp::Equal: return zip(a, b, [](double x, double y) { return indicator(x == y); });
    case FormulaOp::CosineSimilarity: {
      auto [x, y] = align(a, b);
      double dot = 0.0, nx = 0.0, ny = 0.0;
      for (std::size_t i = 0; i < x.numel(); ++i) {
        dot += x[i] * y[i];
        nx += x[i] * x[i];
        ny += y[i] * y[i];
      }
      return Tensor::scalar(dot / (std::sqrt(nx) * std::sqrt(ny)));
    }
    case FormulaOp::KlDiv: {
      auto [x, y] = align(a, b);
      const Tensor p = softmax_flat(x);
      const Tensor q = softmax_flat(y);
      double kl = 0.0;
      for (std::size_t i = 0; i < p.numel(); ++i) {
        const double pi = std::max(p[i], kTiny);
        const double qi = std::max(q[i], kTiny);
        kl += pi * std::log(pi / qi);
      }
      return Tensor::scalar(kl);
    }
    case FormulaOp::MatMul: {
      const Tensor x = flatten_2d(a);
      const Tensor y = flatten_2d(b);
      const std::size_t m = x.dim(0), k1 = x.dim(1), k2 = y.dim(0), n = y.dim(1);
      const std::size_t k = std::min(k1, k2);
      Tensor z({m, n});
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double xv = x[i * k1 + p];
          for (std::size_t j = 0; j < n; ++j) z[i * n + j] += xv * y[p * n + j];
        }
      return z;
    }
    default: break;
  }
  throw ContractError("operator '" + std::string(op_info(op).name) + "' is not binary");
}

}  // namespace formula_ops

// ---------------------------------------------------------------------------
// Evaluation

namespace {

Tensor eval_node(const FormulaExpr& e, const LayerStats& layer, std::uint64_t seed, std::size_t& index) {
  const std::size_t self = index++;
  switch (e.kind) {
    case FormulaExpr::Kind::Stat: return layer.get(e.stat);
    case FormulaExpr::Kind::Unary: {
      const Tensor x = eval_node(e.args[0], layer, seed, index);
      return formula_ops::apply_unary(e.op, x, derive_seed({seed, self}));
    }
    case FormulaExpr::Kind::Binary: {
      const Tensor a = eval_node(e.args[0], layer, seed, index);
      const Tensor b = eval_node(e.args[1], layer, seed, index);
      return formula_ops::apply_binary(e.op, a, b);
    }
  }
  return {};
}

}  // namespace

Tensor eval_layer(const FormulaExpr& expr, const LayerStats& layer, std::uint64_t seed) {
  std::size_t index = 0;
  return eval_node(expr, layer, seed, index);
}

double eval_formula(const FormulaExpr& expr, const ProbeRecord& record) {
  const StatSet needed = referenced_stats(expr);
  for (std::size_t l = 0; l < record.layers.size(); ++l)
    for (std::size_t s = 0; s < kStatCount; ++s)
      if (needed.test(s) && !record.layers[l].has(static_cast<Stat>(s))) {
        const std::string name = l < record.layer_names.size() ? record.layer_names[l] : std::to_string(l);
        throw ContractError("statistic " + std::string(kStatNames[s]) + " missing at layer " + name);
      }
  double sum = 0.0;
  for (const auto& layer : record.layers) {
    const Tensor r = eval_layer(expr, layer, record.seed);
    double m = 0.0;
    for (double v : r.data()) m += v;
    sum += m / static_cast<double>(r.numel());
  }
  return std::isfinite(sum) ? sum : 0.0;
}

}  // namespace gf
