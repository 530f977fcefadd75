#include "gf/forest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "gf/error.hpp"
#include "gf/rng.hpp"

namespace gf {

std::size_t MaxFeatures::resolve(std::size_t n) const {
  std::size_t m = n;
  switch (mode) {
    case MaxFeaturesMode::Count: m = count > 0 ? static_cast<std::size_t>(count) : n; break;
    case MaxFeaturesMode::Sqrt: m = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n)))); break;
    case MaxFeaturesMode::Log2: m = static_cast<std::size_t>(std::floor(std::log2(static_cast<double>(n)))); break;
  }
  return std::clamp<std::size_t>(m, 1, std::max<std::size_t>(n, 1));
}

std::string to_string(const MaxFeatures& m) {
  switch (m.mode) {
    case MaxFeaturesMode::Sqrt: return "sqrt";
    case MaxFeaturesMode::Log2: return "log2";
    case MaxFeaturesMode::Count: break;
  }
  return std::to_string(m.count);
}

MaxFeatures parse_max_features(std::string_view text) {
  if (text == "sqrt") return MaxFeatures::sqrt();
  if (text == "log2") return MaxFeatures::log2();
  int v = 0;
  const std::string s(text);
  std::size_t used = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ConfigError("max_features must be an integer, sqrt or log2, got '" + s + "'");
  return MaxFeatures::of(v);
}

void validate_tuning_ranges(const HyperParams& hp) {
  auto check = [](const char* name, int v, int lo, int hi) {
    if (v < lo || v > hi)
      throw ConfigError(std::string(name) + " = " + std::to_string(v) + " outside [" + std::to_string(lo) + ", " +
                        std::to_string(hi) + "]");
  };
  check("n_estimators", hp.n_estimators, 10, 1000);
  if (hp.max_features.mode == MaxFeaturesMode::Count) check("max_features", hp.max_features.count, 1, 10);
  check("min_samples_split", hp.min_samples_split, 2, 32);
  check("min_samples_leaf", hp.min_samples_leaf, 1, 32);
  check("max_depth", hp.max_depth, 10, 100);
}

std::string to_string(const HyperParams& hp) {
  std::ostringstream ss;
  ss << "n_estimators=" << hp.n_estimators << " max_features=" << to_string(hp.max_features)
     << " min_samples_split=" << hp.min_samples_split << " min_samples_leaf=" << hp.min_samples_leaf
     << " max_depth=" << hp.max_depth << " bootstrap=" << (hp.bootstrap ? "true" : "false");
  return ss.str();
}

double Tree::predict(const double* row) const {
  int i = 0;
  while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
    const TreeNode& n = nodes[static_cast<std::size_t>(i)];
    i = row[n.feature] <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(i)].value;
}

double ForestModel::predict_row(const double* row) const {
  double s = 0.0;
  for (const auto& t : trees) s += t.predict(row);
  return s / static_cast<double>(trees.size());
}

std::vector<double> ForestModel::predict(const Matrix& x) const {
  if (x.cols != n_features)
    throw DataError("model expects " + std::to_string(n_features) + " features, got " + std::to_string(x.cols));
  std::vector<double> out(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) out[i] = predict_row(&x.data[i * x.cols]);
  return out;
}

namespace {

void check_data(const Matrix& x, const std::vector<double>& y) {
  if (x.rows != y.size())
    throw DataError("feature rows (" + std::to_string(x.rows) + ") and targets (" + std::to_string(y.size()) +
                    ") differ");
  if (x.rows < 2) throw DataError("need at least 2 rows to fit");
  if (x.cols == 0) throw DataError("need at least 1 feature to fit");
  for (double v : x.data)
    if (!std::isfinite(v)) throw DataError("non-finite feature value");
  for (double v : y)
    if (!std::isfinite(v)) throw DataError("non-finite target value");
}

struct TreeBuilder {
  const Matrix& x;
  const std::vector<double>& y;
  const HyperParams& hp;
  std::size_t mtry;
  int max_depth;  // <= 0: unbounded
  Rng rng;
  std::vector<std::size_t> idx;
  std::vector<double> importance;
  Tree tree;
  std::vector<std::pair<double, double>> scratch;
  std::vector<std::size_t> features;

  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double score = -std::numeric_limits<double>::infinity();
  };

  int build(std::size_t b, std::size_t e, int depth) {
    const std::size_t n = e - b;
    double sum = 0.0;
    bool constant = true;
    const double y0 = y[idx[b]];
    for (std::size_t i = b; i < e; ++i) {
      sum += y[idx[i]];
      constant = constant && y[idx[i]] == y0;
    }
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    {
      TreeNode& node = tree.nodes.back();
      node.value = sum / static_cast<double>(n);
      node.samples = n;
      node.depth = depth;
    }
    const auto leaf_min = static_cast<std::size_t>(hp.min_samples_leaf);
    if (constant || n < static_cast<std::size_t>(hp.min_samples_split) || n < 2 * leaf_min ||
        (max_depth > 0 && depth >= max_depth))
      return id;

    const Split best = find_split(b, e, sum);
    if (best.feature < 0) return id;

    const auto f = static_cast<std::size_t>(best.feature);
    const auto mid = std::partition(idx.begin() + static_cast<long>(b), idx.begin() + static_cast<long>(e),
                                    [&](std::size_t r) { return x(r, f) <= best.threshold; });
    const auto m = static_cast<std::size_t>(mid - idx.begin());
    importance[f] += std::max(0.0, best.score - sum * sum / static_cast<double>(n));

    const int left = build(b, m, depth + 1);
    const int right = build(m, e, depth + 1);
    TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = left;
    node.right = right;
    return id;
  }

  // Maximizes sumL^2/nL + sumR^2/nR, which is equivalent to maximal variance
  // reduction. Features are visited in ascending index order and thresholds
  // ascending; only a strictly better score replaces the incumbent.
  Split find_split(std::size_t b, std::size_t e, double total) {
    const std::size_t p = x.cols;
    const std::size_t n = e - b;
    const auto leaf_min = static_cast<std::size_t>(hp.min_samples_leaf);
    std::iota(features.begin(), features.end(), 0);
    // Seeded partial shuffle; the first mtry positions form the candidate
    // subset. When none of them admits a valid split the search continues
    // with the remaining features, one at a time.
    for (std::size_t i = 0; i < p; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, p - 1);
      std::swap(features[i], features[pick(rng)]);
    }
    Split best;
    std::size_t tried = 0;
    while (tried < p) {
      const std::size_t batch_end = tried < mtry ? mtry : tried + 1;
      std::vector<std::size_t> batch(features.begin() + static_cast<long>(tried),
                                     features.begin() + static_cast<long>(batch_end));
      std::sort(batch.begin(), batch.end());
      tried = batch_end;
      for (std::size_t f : batch) {
        scratch.resize(n);
        for (std::size_t i = 0; i < n; ++i) scratch[i] = {x(idx[b + i], f), y[idx[b + i]]};
        std::sort(scratch.begin(), scratch.end());
        double left = 0.0;
        for (std::size_t i = 1; i < n; ++i) {
          left += scratch[i - 1].second;
          if (scratch[i - 1].first == scratch[i].first) continue;
          if (i < leaf_min || n - i < leaf_min) continue;
          const double nl = static_cast<double>(i);
          const double nr = static_cast<double>(n - i);
          const double right = total - left;
          const double score = left * left / nl + right * right / nr;
          if (score > best.score) {
            double t = 0.5 * (scratch[i - 1].first + scratch[i].first);
            if (!(t < scratch[i].first)) t = scratch[i - 1].first;
            best = {static_cast<int>(f), t, score};
          }
        }
      }
      if (best.feature >= 0) break;
    }
    return best;
  }
};

Tree grow_tree(const Matrix& x, const std::vector<double>& y, const HyperParams& hp, int max_depth,
               std::uint64_t seed, std::vector<double>& importance) {
  TreeBuilder tb{x, y, hp, hp.max_features.resolve(x.cols), max_depth, Rng(seed), {}, {}, {}, {}, {}};
  tb.features.resize(x.cols);
  tb.importance.assign(x.cols, 0.0);
  if (hp.bootstrap) {
    Rng boot(derive_seed({seed, 0xb0075}));
    std::uniform_int_distribution<std::size_t> pick(0, x.rows - 1);
    tb.idx.resize(x.rows);
    for (auto& i : tb.idx) i = pick(boot);
  } else {
    tb.idx.resize(x.rows);
    std::iota(tb.idx.begin(), tb.idx.end(), 0);
  }
  tb.build(0, tb.idx.size(), 0);
  importance = std::move(tb.importance);
  return std::move(tb.tree);
}

std::vector<std::string> default_names(std::size_t p, const std::vector<std::string>& names) {
  if (names.empty()) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < p; ++i) out.push_back("x" + std::to_string(i));
    return out;
  }
  if (names.size() != p)
    throw DataError(std::to_string(names.size()) + " feature names for " + std::to_string(p) + " columns");
  return names;
}

ForestModel grow(const Matrix& x, const std::vector<double>& y, const HyperParams& hp, int max_depth,
                 std::uint64_t seed, const std::vector<std::string>& names, unsigned threads) {
  ForestModel model;
  model.hyperparams = hp;
  model.n_features = x.cols;
  model.feature_names = default_names(x.cols, names);
  const auto n_trees = static_cast<std::size_t>(hp.n_estimators);
  model.trees.resize(n_trees);
  std::vector<std::vector<double>> imps(n_trees);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < n_trees; t = next++)
      model.trees[t] = grow_tree(x, y, hp, max_depth, derive_seed({seed, t}), imps[t]);
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n_trees));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  model.importances.assign(x.cols, 0.0);
  for (auto& imp : imps) {
    const double s = std::accumulate(imp.begin(), imp.end(), 0.0);
    if (s <= 0.0) continue;
    for (std::size_t f = 0; f < x.cols; ++f) model.importances[f] += imp[f] / s;
  }
  const double s = std::accumulate(model.importances.begin(), model.importances.end(), 0.0);
  if (s > 0.0)
    for (double& v : model.importances) v /= s;
  return model;
}

}  // namespace

ForestModel fit_forest(const Matrix& x, const std::vector<double>& y, const HyperParams& hp, std::uint64_t seed,
                       const std::vector<std::string>& feature_names, const FitOptions& options) {
  validate_tuning_ranges(hp);
  check_data(x, y);
  return grow(x, y, hp, hp.max_depth, seed, feature_names, options.threads);
}

ForestModel fit_tree(const Matrix& x, const std::vector<double>& y, const HyperParams& hp, std::uint64_t seed,
                     const std::vector<std::string>& feature_names) {
  if (hp.min_samples_split < 2) throw ConfigError("min_samples_split must be at least 2");
  if (hp.min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be at least 1");
  if (hp.max_features.mode == MaxFeaturesMode::Count && hp.max_features.count < 1)
    throw ConfigError("max_features must be at least 1");
  check_data(x, y);
  HyperParams one = hp;
  one.n_estimators = 1;
  return grow(x, y, one, hp.max_depth, seed, feature_names, 1);
}

double rmse(const std::vector<double>& p, const std::vector<double>& t) {
  if (p.size() != t.size()) throw DataError("rmse: length mismatch");
  if (p.empty()) throw DataError("rmse: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - t[i]) * (p[i] - t[i]);
  return std::sqrt(s / static_cast<double>(p.size()));
}

std::vector<double> LinearModel::predict(const Matrix& x) const {
  if (x.cols != coef.size()) throw DataError("linear model feature count mismatch");
  std::vector<double> out(x.rows, intercept);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < x.cols; ++j) out[i] += coef[j] * x(i, j);
  return out;
}

LinearModel fit_linear(const Matrix& x, const std::vector<double>& y) {
  check_data(x, y);
  const std::size_t n = x.rows, p = x.cols;
  std::vector<double> mx(p, 0.0);
  double my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    my += y[i];
    for (std::size_t j = 0; j < p; ++j) mx[j] += x(i, j);
  }
  my /= static_cast<double>(n);
  for (double& v : mx) v /= static_cast<double>(n);
  Matrix a(p, p);
  std::vector<double> b(p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double yi = y[i] - my;
    for (std::size_t j = 0; j < p; ++j) {
      const double xj = x(i, j) - mx[j];
      b[j] += xj * yi;
      for (std::size_t k = j; k < p; ++k) a(j, k) += xj * (x(i, k) - mx[k]);
    }
  }
  for (std::size_t j = 0; j < p; ++j) {
    a(j, j) += 1e-8;
    for (std::size_t k = 0; k < j; ++k) a(j, k) = a(k, j);
  }
  LinearModel m;
  m.coef = linalg::solve_spd(std::move(a), std::move(b));
  m.intercept = my;
  for (std::size_t j = 0; j < p; ++j) m.intercept -= m.coef[j] * mx[j];
  return m;
}

// ---------------------------------------------------------------------------
// Serialization: a line-oriented text dump with %.17g numbers.

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
T read_value(std::istream& in, const char* what) {
  T v{};
  if (!(in >> v)) throw ParseError(std::string("model file: expected ") + what, static_cast<std::size_t>(in.tellg()));
  return v;
}

void expect_word(std::istream& in, const std::string& word) {
  std::string w;
  if (!(in >> w) || w != word)
    throw ParseError("model file: expected '" + word + "', got '" + w + "'", static_cast<std::size_t>(in.tellg()));
}

double read_double(std::istream& in, const char* what) {
  const auto s = read_value<std::string>(in, what);
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ParseError(std::string("model file: bad number for ") + what, static_cast<std::size_t>(in.tellg()));
}

}  // namespace

void save_model(const ForestModel& m, std::ostream& out) {
  const HyperParams& hp = m.hyperparams;
  out << "greenfactory-forest 1\n";
  out << "hyperparams " << hp.n_estimators << ' ' << to_string(hp.max_features) << ' ' << hp.min_samples_split << ' '
      << hp.min_samples_leaf << ' ' << hp.max_depth << ' ' << (hp.bootstrap ? 1 : 0) << '\n';
  out << "features " << m.n_features;
  for (const auto& f : m.feature_names) out << ' ' << f;
  out << '\n';
  out << "importances";
  for (double v : m.importances) out << ' ' << fmt(v);
  out << '\n';
  out << "meta " << m.metadata.size() << '\n';
  for (const auto& [k, v] : m.metadata) {
    if (k.empty() || v.empty() || k.find_first_of(" \t\n") != std::string::npos ||
        v.find_first_of(" \t\n") != std::string::npos)
      throw ContractError("save_model: metadata keys and values must be non-empty words");
    out << k << ' ' << v << '\n';
  }
  out << "trees " << m.trees.size() << '\n';
  for (const auto& t : m.trees) {
    out << "tree " << t.nodes.size() << '\n';
    for (const auto& n : t.nodes)
      out << n.feature << ' ' << fmt(n.threshold) << ' ' << n.left << ' ' << n.right << ' ' << fmt(n.value) << ' '
          << n.samples << ' ' << n.depth << '\n';
  }
}

ForestModel load_model(std::istream& in) {
  ForestModel m;
  expect_word(in, "greenfactory-forest");
  const int version = read_value<int>(in, "format version");
  if (version != 1) throw ParseError("model file: unsupported version " + std::to_string(version), 0);
  expect_word(in, "hyperparams");
  HyperParams& hp = m.hyperparams;
  hp.n_estimators = read_value<int>(in, "n_estimators");
  hp.max_features = parse_max_features(read_value<std::string>(in, "max_features"));
  hp.min_samples_split = read_value<int>(in, "min_samples_split");
  hp.min_samples_leaf = read_value<int>(in, "min_samples_leaf");
  hp.max_depth = read_value<int>(in, "max_depth");
  hp.bootstrap = read_value<int>(in, "bootstrap") != 0;
  expect_word(in, "features");
  m.n_features = read_value<std::size_t>(in, "feature count");
  for (std::size_t i = 0; i < m.n_features; ++i) m.feature_names.push_back(read_value<std::string>(in, "feature name"));
  expect_word(in, "importances");
  for (std::size_t i = 0; i < m.n_features; ++i) m.importances.push_back(read_double(in, "importance"));
  expect_word(in, "meta");
  const auto n_meta = read_value<std::size_t>(in, "metadata count");
  for (std::size_t i = 0; i < n_meta; ++i) {
    auto key = read_value<std::string>(in, "metadata key");
    m.metadata[key] = read_value<std::string>(in, "metadata value");
  }
  expect_word(in, "trees");
  const auto n_trees = read_value<std::size_t>(in, "tree count");
  if (n_trees == 0) throw ParseError("model file: no trees", static_cast<std::size_t>(in.tellg()));
  m.trees.resize(n_trees);
  for (auto& t : m.trees) {
    expect_word(in, "tree");
    const auto n_nodes = read_value<std::size_t>(in, "node count");
    t.nodes.resize(n_nodes);
    for (auto& n : t.nodes) {
      n.feature = read_value<int>(in, "split feature");
      n.threshold = read_double(in, "threshold");
      n.left = read_value<int>(in, "left child");
      n.right = read_value<int>(in, "right child");
      n.value = read_double(in, "leaf value");
      n.samples = read_value<std::size_t>(in, "sample count");
      n.depth = read_value<int>(in, "depth");
      const auto nn = static_cast<int>(n_nodes);
      if (n.feature >= static_cast<int>(m.n_features) ||
          (n.feature >= 0 && (n.left <= 0 || n.left >= nn || n.right <= 0 || n.right >= nn)))
        throw ParseError("model file: inconsistent node", static_cast<std::size_t>(in.tellg()));
    }
  }
  return m;
}

// ---------------------------------------------------------------------------

Matrix Standardizer::apply(const Matrix& x) const {
  if (x.cols != mean.size()) throw DataError("standardizer column count mismatch");
  Matrix z = x;
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < x.cols; ++j) z(i, j) = (x(i, j) - mean[j]) / std[j];
  return z;
}

Matrix Standardizer::invert(const Matrix& z) const {
  if (z.cols != mean.size()) throw DataError("standardizer column count mismatch");
  Matrix x = z;
  for (std::size_t i = 0; i < z.rows; ++i)
    for (std::size_t j = 0; j < z.cols; ++j) x(i, j) = z(i, j) * std[j] + mean[j];
  return x;
}

Standardizer fit_standardizer(const Matrix& x) {
  if (x.rows == 0) throw DataError("standardize: empty matrix");
  Standardizer s;
  s.mean.assign(x.cols, 0.0);
  s.std.assign(x.cols, 0.0);
  const double n = static_cast<double>(x.rows);
  for (std::size_t j = 0; j < x.cols; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) m += x(i, j);
    m /= n;
    double v = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) v += (x(i, j) - m) * (x(i, j) - m);
    s.mean[j] = m;
    s.std[j] = std::max(std::sqrt(v / n), 1e-12);
  }
  return s;
}

std::pair<Matrix, Standardizer> standardize(const Matrix& x) {
  Standardizer s = fit_standardizer(x);
  Matrix z = s.apply(x);
  return {std::move(z), std::move(s)};
}

std::vector<double> one_hot(std::string_view tag, const std::vector<std::string>& vocabulary) {
  std::vector<double> v(vocabulary.size(), 0.0);
  for (std::size_t i = 0; i < vocabulary.size(); ++i)
    if (vocabulary[i] == tag) {
      v[i] = 1.0;
      return v;
    }
  throw DataError("unknown tag '" + std::string(tag) + "'");
}

std::vector<double> tradeoff_score(const std::vector<double>& r, const std::vector<double>& t) {
  if (r.size() != t.size()) throw DataError("tradeoff_score: rmse and time lengths differ");
  if (r.size() < 2) throw DataError("tradeoff_score: need at least 2 rows");
  // Scores are rounded to 1e-12 so that an affine rescaling of either column,
  // which perturbs the inputs in the last bits, yields identical scores.
  auto norm = [](const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    std::vector<long double> out(v.size(), 0.0L);
    const long double span = static_cast<long double>(*hi) - *lo;
    if (span > 0.0L)
      for (std::size_t i = 0; i < v.size(); ++i) out[i] = (static_cast<long double>(v[i]) - *lo) / span;
    return out;
  };
  const auto nr = norm(r), nt = norm(t);
  std::vector<double> s(r.size());
  for (std::size_t i = 0; i < s.size(); ++i)
    s[i] = static_cast<double>(std::round((nr[i] + nt[i]) / 2.0L * 1e12L) / 1e12L);
  return s;
}

std::vector<std::string> FeatureTiming::groups(const std::string& feature) const {
  const auto it = groups_of.find(feature);
  return it == groups_of.end() ? std::vector<std::string>{feature} : it->second;
}

double FeatureTiming::cost(const std::vector<std::string>& features) const {
  std::set<std::string> groups;
  for (const auto& f : features)
    for (auto& g : this->groups(f)) groups.insert(std::move(g));
  double total = 0.0;
  for (const auto& g : groups) {
    const auto it = group_seconds.find(g);
    if (it == group_seconds.end()) throw DataError("no timing for feature group '" + g + "'");
    total += it->second;
  }
  return total;
}

Matrix select_columns(const Matrix& x, const std::vector<std::size_t>& cols) {
  Matrix out(x.rows, cols.size());
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = x(i, cols[j]);
  return out;
}

RfeResult rfe(const Matrix& x_train, const std::vector<double>& y_train, const Matrix& x_val,
              const std::vector<double>& y_val, const std::vector<std::string>& names, const HyperParams& hp,
              std::uint64_t seed, const FeatureTiming& timing, const FitOptions& options) {
  if (names.size() != x_train.cols || x_val.cols != x_train.cols)
    throw DataError("rfe: feature names and matrix columns disagree");
  std::vector<std::size_t> active(names.size());
  std::iota(active.begin(), active.end(), 0);
  RfeResult res;
  std::vector<double> rmses, times;
  while (!active.empty()) {
    std::vector<std::string> current;
    for (auto c : active) current.push_back(names[c]);
    const ForestModel m = fit_forest(select_columns(x_train, active), y_train, hp, seed, current, options);
    const double r = rmse(m.predict(select_columns(x_val, active)), y_val);
    res.rows.push_back({active.size(), r, timing.cost(current), 0.0});
    res.selected.push_back(current);
    std::size_t drop = 0;
    for (std::size_t j = 1; j < active.size(); ++j)
      if (m.importances[j] <= m.importances[drop]) drop = j;
    active.erase(active.begin() + static_cast<long>(drop));
  }
  for (const auto& row : res.rows) {
    rmses.push_back(row.rmse);
    times.push_back(row.time_seconds);
  }
  if (res.rows.size() >= 2) {
    const auto s = tradeoff_score(rmses, times);
    for (std::size_t i = 0; i < s.size(); ++i) res.rows[i].score = s[i];
  }
  return res;
}

}  // namespace gf
