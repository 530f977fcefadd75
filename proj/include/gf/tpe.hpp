#pragma once

// A small tree-structured Parzen estimator. The first `warmup` trials are
// uniform random; afterwards trials are split at the gamma quantile of the
// objective and candidates drawn from the good density are ranked by the
// good/bad density ratio.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gf/forest.hpp"

namespace gf {

struct TpeDim {
  enum class Kind { Float, Int, Categorical };
  std::string name;
  Kind kind = Kind::Float;
  double lo = 0.0;  // Float / Int bounds, inclusive
  double hi = 1.0;
  std::vector<std::string> choices;  // Categorical labels

  static TpeDim real(std::string name, double lo, double hi);
  static TpeDim integer(std::string name, int lo, int hi);
  static TpeDim categorical(std::string name, std::vector<std::string> choices);
};

using TpePoint = std::vector<double>;  // categorical dims hold the choice index

struct TpeTrial {
  std::size_t number = 0;  // 0-based
  TpePoint point;
  double objective = 0.0;
  bool warmup = false;
};

struct TpeOptions {
  std::size_t n_trials = 100;
  std::uint64_t seed = 0;
  std::size_t warmup = 20;
  double gamma = 0.25;
  std::size_t candidates = 24;
  bool random_search = false;  // every trial uniform random
  // Evaluated first, in order, as part of the warm-up budget.
  std::vector<TpePoint> enqueued;
};

struct TpeResult {
  std::vector<TpeTrial> trials;
  std::size_t best = 0;  // index of the lowest objective (earliest on ties)
  const TpeTrial& best_trial() const { return trials[best]; }
};

using TpeObjective = std::function<double(const TpePoint&)>;

// Throws ContractError when n_trials < warmup or the space is empty.
TpeResult tpe_optimize(const std::vector<TpeDim>& space, const TpeObjective& objective, const TpeOptions& options);

// The forest tuning ranges as a search space, and conversions.
std::vector<TpeDim> forest_search_space();
HyperParams hyperparams_from_point(const TpePoint& point);
TpePoint point_from_hyperparams(const HyperParams& hp);

}  // namespace gf
