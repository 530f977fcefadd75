#pragma once

// Text formulas over probe statistics, e.g.
//   kl_div(l1_norm(pass_fwd_output), pass_perturbation_wt)
//
// Grammar:  expr := IDENT | OP '(' expr (',' expr)? ')' | '(' expr ')'
//
// Evaluation runs per layer, reduces each layer's result to the mean of its
// elements and sums over layers. Binary operators on mismatched shapes flatten
// both operands and truncate them to the shorter length.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gf/probe.hpp"
#include "gf/tensor.hpp"

namespace gf {

enum class FormulaOp : std::uint8_t {
  // elementwise
  Abs,
  Log,
  Relu,
  Sigmoid,
  Heaviside,
  LessThanZero,
  Power,
  ElementWiseInvert,
  Normalize,
  Softmax,
  OnesLike,
  GaussianInit,
  Transpose,
  // reductions (sum is elementwise add when given two operands)
  Sum,
  Numel,
  L1Norm,
  FrobeniusNorm,
  NormalizedSum,
  Determinant,
  // pairwise
  Subtract,
  ElementWiseProduct,
  Min,
  Max,
  GreaterThan,
  LessThan,
  Equal,
  CosineSimilarity,
  KlDiv,
  MatMul,
};

struct FormulaOpInfo {
  std::string_view name;
  int min_arity;
  int max_arity;
};

const FormulaOpInfo& op_info(FormulaOp op);

struct FormulaExpr {
  enum class Kind : std::uint8_t { Stat, Unary, Binary };

  Kind kind = Kind::Stat;
  Stat stat = Stat::PassFwdInput;
  FormulaOp op = FormulaOp::Abs;
  std::vector<FormulaExpr> args;

  static FormulaExpr leaf(Stat s);
  static FormulaExpr unary(FormulaOp op, FormulaExpr a);
  static FormulaExpr binary(FormulaOp op, FormulaExpr a, FormulaExpr b);

  friend bool operator==(const FormulaExpr&, const FormulaExpr&) = default;
};

FormulaExpr parse_formula(std::string_view text);
std::string pretty_print(const FormulaExpr& expr);

// Statistic identifiers referenced anywhere in the expression.
StatSet referenced_stats(const FormulaExpr& expr);
std::size_t node_count(const FormulaExpr& expr);

// One layer's raw result; `seed` feeds gaussian_init together with the node's
// pre-order index.
Tensor eval_layer(const FormulaExpr& expr, const LayerStats& layer, std::uint64_t seed);

// Sum over layers of mean(eval_layer); a non-finite total becomes 0.
// Throws ContractError naming the statistic and layer when one is missing.
double eval_formula(const FormulaExpr& expr, const ProbeRecord& record);

namespace formula_ops {

// Operator semantics, exposed for direct testing.
Tensor flatten_2d(const Tensor& t);
// Flattens both to rank 1 and truncates to the shorter length when shapes differ.
std::pair<Tensor, Tensor> align(const Tensor& a, const Tensor& b);
Tensor apply_unary(FormulaOp op, const Tensor& x, std::uint64_t gaussian_seed);
Tensor apply_binary(FormulaOp op, const Tensor& a, const Tensor& b);

}  // namespace formula_ops

}  // namespace gf
