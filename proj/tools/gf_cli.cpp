// greenfactory command-line front end; everything goes through the C API.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "greenfactory/greenfactory.h"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;

struct CliError {
  int code;
  std::string message;
};

void check(gf_status s) {
  if (s == GF_OK) return;
  const bool usage = s == GF_ERR_INVALID_ARGUMENT || s == GF_ERR_CONFIG || s == GF_ERR_CONTRACT;
  throw CliError{usage ? kExitUsage : kExitData, std::string(gf_status_name(s)) + ": " + gf_last_error()};
}

// Owns a string handed out by the library.
struct Text {
  char* p = nullptr;
  ~Text() { gf_string_free(p); }
  char** out() { return &p; }
  std::string str() const { return p ? p : ""; }
};

template <class T, void (*Destroy)(T*)>
struct Handle {
  T* p = nullptr;
  ~Handle() { Destroy(p); }
  T** out() { return &p; }
};
using Context = Handle<gf_context, gf_context_destroy>;
using Table = Handle<gf_table, gf_table_destroy>;
using Model = Handle<gf_model, gf_model_destroy>;

// "dir/scores.csv" + "_timing" -> "dir/scores_timing.csv"
std::string sibling(const std::string& path, const std::string& suffix, const std::string& ext) {
  std::filesystem::path p(path);
  return (p.parent_path() / (p.stem().string() + suffix + ext)).string();
}

void write(const std::string& path, const std::string& text) { check(gf_write_file(path.c_str(), text.c_str())); }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError{kExitData, "cannot open " + path};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool g_quiet = false;

void progress(size_t done, size_t total, void*) {
  if (g_quiet) return;
  std::fprintf(stderr, "\r%zu/%zu", done, total);
  if (done == total) std::fputc('\n', stderr);
  std::fflush(stderr);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"greenfactory: zero-cost proxy ensembles for accuracy prediction"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every command");

  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::string registry, out, config;
  app.add_option("--seed", seed, "Seed for sampling, splits and forests");
  app.add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--registry", registry, "Formula registry file overlaid on the built-in one")
      ->check(CLI::ExistingFile);
  app.add_option("--out", out, "Output path");
  app.add_option("--config", config, "key = value file; command-line flags take precedence")
      ->check(CLI::ExistingFile);
  app.add_flag("--quiet", g_quiet, "No progress output");

  // Options shared by several commands, forwarded as context options when given.
  std::vector<std::pair<std::string, std::string>> forwarded;
  auto forward = [&](CLI::App* sub, const std::string& flag, const std::string& key, const std::string& help) {
    sub->add_option_function<std::string>(flag, [&forwarded, key](const std::string& v) { forwarded.emplace_back(key, v); },
                                          help);
  };
  auto split_flags = [&](CLI::App* sub) {
    forward(sub, "--split", "split", "stratified (default) or random");
    forward(sub, "--bins", "bins", "Accuracy bins for stratification (default 5)");
    forward(sub, "--bin-mode", "bin_mode", "equal_width (default) or quantile");
  };
  auto hp_flags = [&](CLI::App* sub) {
    forward(sub, "--hp", "hp", "default, greenfactory, fast or a tuned.json path");
    forward(sub, "--n-estimators", "n_estimators", "Override: number of trees");
    forward(sub, "--max-features", "max_features", "Override: integer, sqrt or log2");
    forward(sub, "--min-samples-split", "min_samples_split", "Override");
    forward(sub, "--min-samples-leaf", "min_samples_leaf", "Override");
    forward(sub, "--max-depth", "max_depth", "Override");
    forward(sub, "--bootstrap", "bootstrap", "Override: true or false");
  };
  auto probe_flags = [&](CLI::App* sub) {
    forward(sub, "--batch-size", "batch_size", "Probe mini-batch size (default 16)");
    forward(sub, "--noise-sigma", "noise_sigma", "Noise pass standard deviation (default 1.0)");
    forward(sub, "--perturb-eps", "perturb_eps", "Perturbation pass step (default 0.01)");
  };

  auto* collect = app.add_subcommand("collect", "Sample and score networks into a score table");
  std::string space = "both", target_csv, timing_out;
  std::size_t n = 100;
  collect->add_option("--space", space, "tss, sss or both")->check(CLI::IsMember({"tss", "sss", "both"}));
  collect->add_option("-n,--n", n, "Networks per search space")->check(CLI::PositiveNumber);
  collect->add_option("--target-csv", target_csv, "Score these (spec, dataset, accuracy) rows instead of sampling")
      ->check(CLI::ExistingFile);
  collect->add_option("--timing", timing_out, "Timing sidecar path (default <out>_timing.csv)");
  probe_flags(collect);

  auto* score = app.add_subcommand("score", "Score one spec and print its table row");
  std::string spec, dataset = "cifar10";
  score->add_option("spec", spec, "Spec string, e.g. tss|skip,conv3x3,none,conv1x1,skip,avgpool3x3")->required();
  score->add_option("--dataset", dataset, "cifar10, cifar100 or imagenet16");
  probe_flags(score);

  auto* train = app.add_subcommand("train", "Fit the forest on a score table");
  std::string table_path, report_out;
  train->add_option("table", table_path, "Score table CSV")->required()->check(CLI::ExistingFile);
  forward(train, "--features", "features", "all, greenfactory (default), fast or a comma list");
  train->add_option("--report", report_out, "RMSE report CSV (default <out>_rmse.csv)");
  hp_flags(train);
  split_flags(train);

  auto* rfe = app.add_subcommand("rfe", "Recursive feature elimination with the trade-off score");
  std::string rfe_table, rfe_timing, scores_only, selection_out;
  rfe->add_option("table", rfe_table, "Score table CSV")->check(CLI::ExistingFile);
  rfe->add_option("--timing", rfe_timing, "Timing sidecar written by collect")->check(CLI::ExistingFile);
  rfe->add_option("--scores-only", scores_only, "Recompute scores of an existing k,rmse,time_seconds CSV")
      ->check(CLI::ExistingFile);
  rfe->add_option("--selection", selection_out, "Selected-feature matrix CSV (default <out>_selected.csv)");
  forward(rfe, "--features", "features", "Starting feature set (default all)");
  hp_flags(rfe);
  split_flags(rfe);

  auto* tune = app.add_subcommand("tune", "Tune forest hyperparameters on the validation slice");
  std::string tune_table, log_out;
  tune->add_option("table", tune_table, "Score table CSV")->required()->check(CLI::ExistingFile);
  forward(tune, "--trials", "trials", "Number of trials, at least 20 (default 100)");
  forward(tune, "--features", "features", "Feature set (default greenfactory)");
  forward(tune, "--random-search", "random_search", "true: uniform sampling after warm-up too");
  tune->add_option("--log", log_out, "Trial log CSV (default <out>_trials.csv)");
  split_flags(tune);

  auto* eval = app.add_subcommand("eval", "Correlations and RMSE of a model on the test slice");
  std::string model_path, eval_table, mode, rmse_out;
  eval->add_option("model", model_path, "Model file")->required()->check(CLI::ExistingFile);
  eval->add_option("table", eval_table, "Score table CSV")->required()->check(CLI::ExistingFile);
  eval->add_option("--mode", mode, "random or stratified (default: as trained)")
      ->check(CLI::IsMember({"random", "stratified"}));
  eval->add_option("--rmse-out", rmse_out, "RMSE CSV (default <out>_rmse.csv when --out is set)");
  forward(eval, "--bins", "bins", "Accuracy bins (default: as trained)");
  forward(eval, "--bin-mode", "bin_mode", "equal_width or quantile (default: as trained)");

  auto* report = app.add_subcommand("report", "Proxy correlations of a score table");
  std::string report_table;
  bool test_only = false;
  report->add_option("table", report_table, "Score table CSV")->required()->check(CLI::ExistingFile);
  report->add_flag("--test-only", test_only, "Only the test slice of the split");
  split_flags(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return e.get_exit_code() == 0 ? code : kExitUsage;
  }

  try {
    Context ctx;
    check(gf_context_create(ctx.out()));
    if (!config.empty()) check(gf_context_load_config(ctx.p, config.c_str()));
    if (app.count("--seed")) check(gf_context_set_option(ctx.p, "seed", std::to_string(seed).c_str()));
    if (app.count("--workers")) check(gf_context_set_option(ctx.p, "workers", std::to_string(workers).c_str()));
    if (!mode.empty()) check(gf_context_set_option(ctx.p, "split", mode.c_str()));
    for (const auto& [k, v] : forwarded) check(gf_context_set_option(ctx.p, k.c_str(), v.c_str()));
    if (!registry.empty()) check(gf_context_load_registry(ctx.p, registry.c_str()));
    check(gf_context_set_progress(ctx.p, progress, nullptr));

    if (*collect) {
      const std::string path = out.empty() ? "scores.csv" : out;
      Table t;
      Text timing;
      check(gf_collect(ctx.p, space.c_str(), n, target_csv.empty() ? nullptr : target_csv.c_str(), t.out(),
                       timing.out()));
      check(gf_table_save(ctx.p, t.p, path.c_str()));
      const std::string tpath = timing_out.empty() ? sibling(path, "_timing", ".csv") : timing_out;
      write(tpath, timing.str());
      if (!g_quiet) std::cerr << "wrote " << gf_table_rows(t.p) << " rows to " << path << ", timing to " << tpath << '\n';
    } else if (*score) {
      Text row;
      check(gf_score_spec(ctx.p, spec.c_str(), dataset.c_str(), row.out()));
      if (out.empty())
        std::cout << row.str();
      else
        write(out, row.str());
    } else if (*train) {
      const std::string path = out.empty() ? "model.gfm" : out;
      Table t;
      Model m;
      Text csv, text;
      check(gf_table_load(ctx.p, table_path.c_str(), t.out()));
      check(gf_train(ctx.p, t.p, m.out(), csv.out(), text.out()));
      check(gf_model_save(ctx.p, m.p, path.c_str()));
      write(report_out.empty() ? sibling(path, "_rmse", ".csv") : report_out, csv.str());
      std::cout << text.str();
    } else if (*rfe) {
      const std::string path = out.empty() ? "rfe.csv" : out;
      if (!scores_only.empty()) {
        Text csv;
        check(gf_rfe_rescore(ctx.p, read_file(scores_only).c_str(), csv.out()));
        write(path, csv.str());
        std::cout << csv.str();
      } else {
        if (rfe_table.empty() || rfe_timing.empty())
          throw CliError{kExitUsage, "rfe needs a table and --timing (or --scores-only)"};
        Table t;
        Text csv, sel, text;
        check(gf_table_load(ctx.p, rfe_table.c_str(), t.out()));
        check(gf_rfe(ctx.p, t.p, rfe_timing.c_str(), csv.out(), sel.out(), text.out()));
        write(path, csv.str());
        write(selection_out.empty() ? sibling(path, "_selected", ".csv") : selection_out, sel.str());
        std::cout << text.str();
      }
    } else if (*tune) {
      const std::string path = out.empty() ? "tuned.json" : out;
      Table t;
      Text json, log;
      check(gf_table_load(ctx.p, tune_table.c_str(), t.out()));
      check(gf_tune(ctx.p, t.p, json.out(), log.out()));
      write(path, json.str());
      write(log_out.empty() ? sibling(path, "_trials", ".csv") : log_out, log.str());
      std::cout << json.str();
    } else if (*eval) {
      Table t;
      Model m;
      Text corr, rmse, text;
      check(gf_model_load(ctx.p, model_path.c_str(), m.out()));
      check(gf_table_load(ctx.p, eval_table.c_str(), t.out()));
      check(gf_eval(ctx.p, m.p, t.p, corr.out(), rmse.out(), text.out()));
      if (!out.empty()) {
        write(out, corr.str());
        write(rmse_out.empty() ? sibling(out, "_rmse", ".csv") : rmse_out, rmse.str());
      } else if (!rmse_out.empty()) {
        write(rmse_out, rmse.str());
      }
      std::cout << text.str();
    } else if (*report) {
      Table t;
      Text corr, text;
      check(gf_table_load(ctx.p, report_table.c_str(), t.out()));
      check(gf_report(ctx.p, t.p, test_only ? 1 : 0, corr.out(), text.out()));
      if (!out.empty()) write(out, corr.str());
      std::cout << text.str();
    }
  } catch (const CliError& e) {
    std::cerr << "greenfactory: " << e.message << '\n';
    return e.code;
  }
  return 0;
}
