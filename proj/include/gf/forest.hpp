#pragma once

// CART regression forests, a single-tree and a least-squares baseline,
// recursive feature elimination and the RMSE/time trade-off score.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gf/linalg.hpp"

namespace gf {

using linalg::Matrix;

enum class MaxFeaturesMode { Count, Sqrt, Log2 };

struct MaxFeatures {
  MaxFeaturesMode mode = MaxFeaturesMode::Sqrt;
  int count = 0;  // used when mode == Count

  static MaxFeatures sqrt() { return {MaxFeaturesMode::Sqrt, 0}; }
  static MaxFeatures log2() { return {MaxFeaturesMode::Log2, 0}; }
  static MaxFeatures of(int n) { return {MaxFeaturesMode::Count, n}; }

  // Features tried per split out of `n_features` (at least 1, at most n).
  std::size_t resolve(std::size_t n_features) const;

  friend bool operator==(const MaxFeatures&, const MaxFeatures&) = default;
};

std::string to_string(const MaxFeatures& m);
MaxFeatures parse_max_features(std::string_view text);

struct HyperParams {
  int n_estimators = 100;
  MaxFeatures max_features = MaxFeatures::sqrt();
  int min_samples_split = 2;
  int min_samples_leaf = 1;
  int max_depth = 100;
  bool bootstrap = true;

  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

// Throws ConfigError naming the first value outside the tuning ranges.
void validate_tuning_ranges(const HyperParams& hp);
std::string to_string(const HyperParams& hp);

struct TreeNode {
  int feature = -1;  // -1 for a leaf
  double threshold = 0.0;  // go left when x[feature] <= threshold
  int left = -1;
  int right = -1;
  double value = 0.0;  // mean target of the node's samples
  std::size_t samples = 0;
  int depth = 0;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  double predict(const double* row) const;
};

struct ForestModel {
  std::vector<Tree> trees;
  HyperParams hyperparams;
  std::vector<std::string> feature_names;
  std::vector<double> importances;  // sums to 1 when any split exists
  std::size_t n_features = 0;
  // Free-form key/value pairs kept with the model (split settings etc.).
  // Values must not contain whitespace.
  std::map<std::string, std::string> metadata;

  std::vector<double> predict(const Matrix& x) const;
  double predict_row(const double* row) const;
};

struct FitOptions {
  // Worker threads for tree construction; 0 picks hardware concurrency.
  unsigned threads = 0;
};

// Validates the tuning ranges, then grows hp.n_estimators trees. Tree t is
// seeded from (seed, t) so the result does not depend on the thread count.
ForestModel fit_forest(const Matrix& x, const std::vector<double>& y, const HyperParams& hp, std::uint64_t seed,
                       const std::vector<std::string>& feature_names = {}, const FitOptions& options = {});

// One CART tree. Only requires min_samples_split >= 2, min_samples_leaf >= 1
// and max_depth >= 1 (max_depth <= 0 means unbounded).
ForestModel fit_tree(const Matrix& x, const std::vector<double>& y, const HyperParams& hp, std::uint64_t seed,
                     const std::vector<std::string>& feature_names = {});

double rmse(const std::vector<double>& predicted, const std::vector<double>& target);

struct LinearModel {
  std::vector<double> coef;
  double intercept = 0.0;
  std::vector<double> predict(const Matrix& x) const;
};

// Least squares via normal equations with a 1e-8 ridge on the coefficients.
LinearModel fit_linear(const Matrix& x, const std::vector<double>& y);

void save_model(const ForestModel& model, std::ostream& out);
ForestModel load_model(std::istream& in);  // ParseError on malformed input

// Per-column standardization.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> std;  // floored at 1e-12
  Matrix apply(const Matrix& x) const;
  Matrix invert(const Matrix& z) const;
};
Standardizer fit_standardizer(const Matrix& x);
std::pair<Matrix, Standardizer> standardize(const Matrix& x);

std::vector<double> one_hot(std::string_view tag, const std::vector<std::string>& vocabulary);

// (minmax(rmse) + minmax(time)) / 2; a constant column normalizes to 0.
std::vector<double> tradeoff_score(const std::vector<double>& rmse, const std::vector<double>& time);

struct TradeoffRow {
  std::size_t k = 0;
  double rmse = 0.0;
  double time_seconds = 0.0;
  double score = 0.0;
};

// Feature cost model for RFE. A feature charges every group it belongs to;
// groups shared by several selected features are charged once.
struct FeatureTiming {
  std::map<std::string, std::vector<std::string>> groups_of;  // absent: the feature is its own group
  std::map<std::string, double> group_seconds;

  std::vector<std::string> groups(const std::string& feature) const;
  double cost(const std::vector<std::string>& features) const;  // DataError on unknown group
};

struct RfeResult {
  std::vector<TradeoffRow> rows;  // k = n_features ... 1
  std::vector<std::vector<std::string>> selected;  // feature set at each row
};

// Step-1 elimination. Each step refits on the training rows with the same
// seed, records the validation RMSE and the feature-set cost, then drops the
// feature with the lowest importance (ties: the highest column index).
RfeResult rfe(const Matrix& x_train, const std::vector<double>& y_train, const Matrix& x_val,
              const std::vector<double>& y_val, const std::vector<std::string>& feature_names, const HyperParams& hp,
              std::uint64_t seed, const FeatureTiming& timing, const FitOptions& options = {});

// Column subset helper.
Matrix select_columns(const Matrix& x, const std::vector<std::size_t>& columns);

}  // namespace gf
