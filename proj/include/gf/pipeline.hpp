#pragma once

// End-to-end flows behind the command line: build score tables, train and
// tune the forest, run feature elimination, evaluate against proxies.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gf/arch.hpp"
#include "gf/forest.hpp"
#include "gf/metrics.hpp"
#include "gf/proxies.hpp"
#include "gf/table.hpp"
#include "gf/tpe.hpp"

namespace gf {

class FormulaRegistry;

// ---- feature sets and hyperparameter presets ----

// "all" (26), "greenfactory" (all but synflow) or "fast" (6).
std::vector<std::string> preset_features(std::string_view preset);
bool is_feature_preset(std::string_view name);
// A preset name or a comma-separated list of feature names. DataError lists
// every unknown name; duplicates are rejected.
std::vector<std::string> resolve_features(std::string_view text);

// "greenfactory" and "fast" are the tuned settings reported for the two
// presets; "default" is HyperParams{}.
HyperParams preset_hyperparams(std::string_view preset);

// ---- scoring ----

struct ScoringOptions {
  std::size_t batch_size = 16;
  double noise_sigma = 1.0;
  double perturb_eps = 0.01;
  std::size_t resolution = Network::kDefaultResolution;
};

// Cost groups each feature charges: the probe passes its statistics need,
// its own evaluator, and network setup. group_seconds is left empty.
FeatureTiming feature_cost_groups(const FormulaRegistry& registry);

struct ScoreJob {
  ArchSpec spec;  // the class count is set per dataset
  std::string net_id;
  std::uint64_t seed = 0;  // drives init, batch, probes and the surrogate noise
  std::vector<Dataset> datasets;
  // Per dataset; absent values fall back to the surrogate target.
  std::vector<std::optional<double>> accuracy;
};

struct NetworkScore {
  ScoreRow row;
  TenasComponents tenas;
  AzComponents az;
  bool has_tenas = false;  // components were computed
  bool has_az = false;
};

// Scores one network on each of job.datasets. Only `features` are computed;
// the others stay 0. Proxies that do not depend on the classifier head
// (naswot, zennas, the AZ components) are computed once and shared across
// datasets. Seconds per cost group are added to *group_seconds when given.
// The tenas column holds the standalone R - log(kappa) and aznas holds 0
// until apply_population_columns runs.
std::vector<NetworkScore> score_network(const ScoreJob& job, const FormulaRegistry& registry,
                                        const std::vector<std::string>& features, const ScoringOptions& options,
                                        std::map<std::string, double>* group_seconds = nullptr);

// Replaces tenas with the rank-sum and aznas with the log-rank aggregate
// inside each (search space, dataset) group of two or more rows.
void apply_population_columns(std::vector<NetworkScore>& scores);

// ---- collect ----

struct CollectOptions {
  std::vector<SearchSpace> spaces = {SearchSpace::Tss, SearchSpace::Sss};
  std::size_t n = 100;  // networks per space
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::vector<Dataset> datasets = {Dataset::Cifar10, Dataset::Cifar100, Dataset::Imagenet16};
  ScoringOptions scoring;
  std::function<void(std::size_t done, std::size_t total)> progress;
};

struct CollectResult {
  ScoreTable table;
  FeatureTiming timing;  // group seconds summed over the run
  double wall_seconds = 0.0;
};

// n sampled networks per space, ids "<space>-<index>".
std::vector<ScoreJob> sample_jobs(const CollectOptions& options);
// External targets: CSV with columns spec, dataset, accuracy (net_id optional).
// Rows sharing a spec become one job.
std::vector<ScoreJob> jobs_from_targets(std::istream& csv, std::uint64_t seed);
std::vector<ScoreJob> jobs_from_targets(const std::string& path, std::uint64_t seed);

// Rows come out in job order, datasets in job order within a network.
CollectResult collect(const std::vector<ScoreJob>& jobs, const FormulaRegistry& registry,
                      const CollectOptions& options);

// Timing sidecar: group,seconds,features (features joined with ';').
void write_timing_csv(const FeatureTiming& timing, std::ostream& out);
FeatureTiming read_timing_csv(std::istream& in);
FeatureTiming load_timing_csv(const std::string& path);

// ---- splits ----

struct SplitConfig {
  std::uint64_t seed = 0;
  bool stratified = true;  // false: a single bin, i.e. a plain random split
  int bins = 5;
  BinMode bin_mode = BinMode::EqualWidth;
};

SplitAssignment split_table(const ScoreTable& table, const SplitConfig& config);
void store_split(const SplitConfig& config, ForestModel& model);
// Reads the split settings saved with a model; `fallback` for missing keys.
SplitConfig stored_split(const ForestModel& model, const SplitConfig& fallback);

// ---- train ----

struct RmseRow {
  std::string slice;
  std::string search_space;  // "all" for the pooled row
  std::string dataset;       // "all" for the pooled row
  double rmse = 0.0;
  std::size_t n = 0;
};

struct TrainOptions {
  std::vector<std::string> features = preset_features("greenfactory");
  HyperParams hp = preset_hyperparams("greenfactory");
  SplitConfig split;
  std::uint64_t forest_seed = 0;
  unsigned threads = 0;
};

struct TrainResult {
  ForestModel model;
  SplitAssignment split;
  std::vector<RmseRow> rmse;
};

// Fits on the train slice; reports RMSE for every slice.
TrainResult train(const ScoreTable& table, const TrainOptions& options);

// Per slice: one pooled row, then one per (space, dataset) group present.
std::vector<RmseRow> rmse_report(const std::vector<double>& predicted, const ScoreTable& table,
                                 const SplitAssignment& split);
void write_rmse_csv(const std::vector<RmseRow>& rows, std::ostream& out);
std::string format_rmse_text(const std::vector<RmseRow>& rows);

// ---- rfe ----

struct RfeOptions {
  std::vector<std::string> features = preset_features("all");
  HyperParams hp;
  SplitConfig split;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

// Elimination on the train slice scored on the validation slice, with the
// trade-off score filled in.
RfeResult run_rfe(const ScoreTable& table, const FeatureTiming& timing, const RfeOptions& options);
void write_rfe_csv(const std::vector<TradeoffRow>& rows, std::ostream& out);  // k,rmse,time_seconds,score
// Reads k,rmse,time_seconds (score ignored) and recomputes the score column.
std::vector<TradeoffRow> rescore_rfe_csv(std::istream& in);
// One row per step: k, then a 0/1 column per feature of `features`.
void write_rfe_selection_csv(const RfeResult& result, const std::vector<std::string>& features, std::ostream& out);
std::string format_rfe_text(const std::vector<TradeoffRow>& rows);

// ---- tune ----

struct TuneOptions {
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  std::vector<std::string> features = preset_features("greenfactory");
  SplitConfig split;
  unsigned threads = 0;
  bool random_search = false;
  std::function<void(const TpeTrial&)> on_trial;
};

struct TuneResult {
  TpeResult search;
  HyperParams best;
  double best_rmse = 0.0;
  double default_rmse = 0.0;  // HyperParams{}, evaluated as trial 0
  std::vector<std::string> features;
  std::uint64_t seed = 0;
};

// Objective: validation RMSE. The library defaults are enqueued as the first
// warm-up trial.
TuneResult tune(const ScoreTable& table, const TuneOptions& options);
std::string tuned_json(const TuneResult& result);
HyperParams parse_tuned_json(std::string_view text);  // ConfigError on bad content
HyperParams load_tuned_json(const std::string& path);
void write_trial_log(const TuneResult& result, std::ostream& out);

// ---- eval / report ----

struct EvalResult {
  std::vector<CorrelationRow> correlations;  // proxies, params, flops and "ensemble"
  std::vector<RmseRow> rmse;
  std::vector<std::string> warnings;
};

// Test-slice correlations with the ensemble as one more column, plus RMSE
// per slice. DataError when the model's features are not table features.
EvalResult evaluate(const ForestModel& model, const ScoreTable& table, const SplitConfig& split);

// Proxy, params and flops columns only; over `rows` (all rows when empty).
std::vector<NamedColumn> proxy_columns(const ScoreTable& table);
EvalResult report(const ScoreTable& table, const std::vector<std::size_t>& rows = {});

// ---- files ----

// Writes through a temporary file in the same directory, then renames.
void write_file_atomic(const std::string& path, std::string_view content);

}  // namespace gf
