#include "gf/tpe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gf/error.hpp"
#include "gf/rng.hpp"

namespace gf {

TpeDim TpeDim::real(std::string name, double lo, double hi) {
  return {std::move(name), Kind::Float, lo, hi, {}};
}

TpeDim TpeDim::integer(std::string name, int lo, int hi) {
  return {std::move(name), Kind::Int, static_cast<double>(lo), static_cast<double>(hi), {}};
}

TpeDim TpeDim::categorical(std::string name, std::vector<std::string> choices) {
  const double hi = static_cast<double>(choices.size()) - 1.0;
  return {std::move(name), Kind::Categorical, 0.0, hi, std::move(choices)};
}

namespace {

constexpr double kPi = 3.14159265358979323846;

double sample_uniform(const TpeDim& d, Rng& rng) {
  switch (d.kind) {
    case TpeDim::Kind::Float: return std::uniform_real_distribution<double>(d.lo, d.hi)(rng);
    case TpeDim::Kind::Int:
      return static_cast<double>(
          std::uniform_int_distribution<long>(static_cast<long>(d.lo), static_cast<long>(d.hi))(rng));
    case TpeDim::Kind::Categorical:
      return static_cast<double>(std::uniform_int_distribution<std::size_t>(0, d.choices.size() - 1)(rng));
  }
  return d.lo;
}

// Per-dimension Parzen estimator over one set of observed values.
struct Density {
  const TpeDim* dim = nullptr;
  std::vector<double> centers;
  double bandwidth = 1.0;
  std::vector<double> probs;  // categorical

  Density(const TpeDim& d, std::vector<double> values) : dim(&d), centers(std::move(values)) {
    if (d.kind == TpeDim::Kind::Categorical) {
      const std::size_t k = d.choices.size();
      probs.assign(k, 1.0);  // add-one smoothing
      for (double v : centers) probs[static_cast<std::size_t>(v)] += 1.0;
      const double total = static_cast<double>(centers.size() + k);
      for (double& p : probs) p /= total;
    } else {
      const double range = std::max(d.hi - d.lo, 1e-12);
      bandwidth = range / std::sqrt(static_cast<double>(std::max<std::size_t>(centers.size(), 1)));
    }
  }

  double log_pdf(double x) const {
    if (dim->kind == TpeDim::Kind::Categorical) return std::log(probs[static_cast<std::size_t>(x)]);
    double s = 0.0;
    for (double c : centers) {
      const double z = (x - c) / bandwidth;
      s += std::exp(-0.5 * z * z);
    }
    s /= static_cast<double>(centers.size()) * bandwidth * std::sqrt(2.0 * kPi);
    return std::log(std::max(s, 1e-300));
  }

  double sample(Rng& rng) const {
    if (dim->kind == TpeDim::Kind::Categorical) {
      std::discrete_distribution<std::size_t> pick(probs.begin(), probs.end());
      return static_cast<double>(pick(rng));
    }
    const double c = centers[std::uniform_int_distribution<std::size_t>(0, centers.size() - 1)(rng)];
    std::normal_distribution<double> normal(c, bandwidth);
    double v = normal(rng);
    // Redraw a few times before clipping so mass near the bounds is not piled up.
    for (int i = 0; i < 8 && (v < dim->lo || v > dim->hi); ++i) v = normal(rng);
    v = std::clamp(v, dim->lo, dim->hi);
    if (dim->kind == TpeDim::Kind::Int) v = std::clamp(std::round(v), dim->lo, dim->hi);
    return v;
  }
};

}  // namespace

TpeResult tpe_optimize(const std::vector<TpeDim>& space, const TpeObjective& objective, const TpeOptions& o) {
  if (space.empty()) throw ContractError("tpe_optimize: empty search space");
  if (o.n_trials < o.warmup) throw ContractError("tpe_optimize: n_trials must be at least " + std::to_string(o.warmup));
  if (o.enqueued.size() > o.warmup) throw ContractError("tpe_optimize: more enqueued points than warm-up trials");
  for (const auto& d : space)
    if (d.kind == TpeDim::Kind::Categorical ? d.choices.empty() : !(d.lo <= d.hi))
      throw ContractError("tpe_optimize: dimension '" + d.name + "' has an empty range");

  Rng rng(derive_seed({o.seed, 0x79e}));
  TpeResult res;
  for (std::size_t t = 0; t < o.n_trials; ++t) {
    TpeTrial trial;
    trial.number = t;
    trial.warmup = t < o.warmup;
    if (t < o.enqueued.size()) {
      trial.point = o.enqueued[t];
      if (trial.point.size() != space.size()) throw ContractError("tpe_optimize: enqueued point has wrong size");
    } else if (trial.warmup || o.random_search) {
      for (const auto& d : space) trial.point.push_back(sample_uniform(d, rng));
    } else {
      std::vector<std::size_t> order(res.trials.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return res.trials[a].objective < res.trials[b].objective; });
      const auto n_good = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::ceil(o.gamma * static_cast<double>(order.size()))));
      std::vector<Density> good, bad;
      for (std::size_t d = 0; d < space.size(); ++d) {
        std::vector<double> gv, bv;
        for (std::size_t i = 0; i < order.size(); ++i)
          (i < n_good ? gv : bv).push_back(res.trials[order[i]].point[d]);
        good.emplace_back(space[d], std::move(gv));
        bad.emplace_back(space[d], std::move(bv));
      }
      double best_ratio = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < o.candidates; ++c) {
        TpePoint p;
        double ratio = 0.0;
        for (std::size_t d = 0; d < space.size(); ++d) {
          p.push_back(good[d].sample(rng));
          ratio += good[d].log_pdf(p.back()) - bad[d].log_pdf(p.back());
        }
        if (ratio > best_ratio) {
          best_ratio = ratio;
          trial.point = std::move(p);
        }
      }
    }
    trial.objective = objective(trial.point);
    if (res.trials.empty() || trial.objective < res.trials[res.best].objective) res.best = t;
    res.trials.push_back(std::move(trial));
  }
  return res;
}

std::vector<TpeDim> forest_search_space() {
  std::vector<std::string> mf;
  for (int i = 1; i <= 10; ++i) mf.push_back(std::to_string(i));
  mf.push_back("sqrt");
  mf.push_back("log2");
  return {
      TpeDim::integer("n_estimators", 10, 1000),
      TpeDim::categorical("max_features", mf),
      TpeDim::integer("min_samples_split", 2, 32),
      TpeDim::integer("min_samples_leaf", 1, 32),
      TpeDim::integer("max_depth", 10, 100),
      TpeDim::categorical("bootstrap", {"false", "true"}),
  };
}

HyperParams hyperparams_from_point(const TpePoint& p) {
  if (p.size() != 6) throw ContractError("hyperparams_from_point: expected 6 coordinates");
  HyperParams hp;
  hp.n_estimators = static_cast<int>(std::lround(p[0]));
  const auto mf = static_cast<int>(std::lround(p[1]));
  hp.max_features = mf < 10 ? MaxFeatures::of(mf + 1) : (mf == 10 ? MaxFeatures::sqrt() : MaxFeatures::log2());
  hp.min_samples_split = static_cast<int>(std::lround(p[2]));
  hp.min_samples_leaf = static_cast<int>(std::lround(p[3]));
  hp.max_depth = static_cast<int>(std::lround(p[4]));
  hp.bootstrap = std::lround(p[5]) == 1;
  return hp;
}

TpePoint point_from_hyperparams(const HyperParams& hp) {
  double mf = 0.0;
  switch (hp.max_features.mode) {
    case MaxFeaturesMode::Count: mf = hp.max_features.count - 1; break;
    case MaxFeaturesMode::Sqrt: mf = 10; break;
    case MaxFeaturesMode::Log2: mf = 11; break;
  }
  return {static_cast<double>(hp.n_estimators), mf, static_cast<double>(hp.min_samples_split),
          static_cast<double>(hp.min_samples_leaf), static_cast<double>(hp.max_depth), hp.bootstrap ? 1.0 : 0.0};
}

}  // namespace gf
