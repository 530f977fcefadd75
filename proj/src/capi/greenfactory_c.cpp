#include "greenfactory/greenfactory.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <new>
#include <set>
#include <sstream>
#include <string>

#include "gf/error.hpp"
#include "gf/formula.hpp"
#include "gf/metrics.hpp"
#include "gf/pipeline.hpp"
#include "gf/registry.hpp"
#include "gf/rng.hpp"

struct gf_context {
  gf::FormulaRegistry registry = gf::FormulaRegistry::builtin();
  std::map<std::string, std::string> options;  // only explicitly set keys
  gf_progress_fn progress = nullptr;
  void* progress_user = nullptr;
};

struct gf_table {
  gf::ScoreTable table;
};

struct gf_model {
  gf::ForestModel model;
};

namespace {

thread_local std::string g_last_error;

gf_status fail(gf_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

// Runs fn, translating exceptions into status codes.
template <class Fn>
gf_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return GF_OK;
  } catch (const gf::ShapeError& e) {
    return fail(GF_ERR_SHAPE, e.what());
  } catch (const gf::ContractError& e) {
    return fail(GF_ERR_CONTRACT, e.what());
  } catch (const gf::ParseError& e) {
    return fail(GF_ERR_PARSE, e.what());
  } catch (const gf::ConfigError& e) {
    return fail(GF_ERR_CONFIG, e.what());
  } catch (const gf::DataError& e) {
    return fail(GF_ERR_DATA, e.what());
  } catch (const gf::IoError& e) {
    return fail(GF_ERR_IO, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(GF_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::bad_alloc&) {
    return fail(GF_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(GF_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(GF_ERR_INTERNAL, "unknown error");
  }
}

#define GF_REQUIRE(cond, what) \
  if (!(cond)) return fail(GF_ERR_INVALID_ARGUMENT, what)

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

void put(char** out, const std::string& s) {
  if (out) *out = dup_string(s);
}

// ---- options ----

enum class Kind { UInt, Real, Bool, Text };

const std::map<std::string, Kind>& option_kinds() {
  static const std::map<std::string, Kind> kinds = {
      {"seed", Kind::UInt},          {"workers", Kind::UInt},       {"batch_size", Kind::UInt},
      {"noise_sigma", Kind::Real},   {"perturb_eps", Kind::Real},   {"resolution", Kind::UInt},
      {"split", Kind::Text},         {"bins", Kind::UInt},          {"bin_mode", Kind::Text},
      {"features", Kind::Text},      {"hp", Kind::Text},            {"n_estimators", Kind::UInt},
      {"max_features", Kind::Text},  {"min_samples_split", Kind::UInt}, {"min_samples_leaf", Kind::UInt},
      {"max_depth", Kind::UInt},     {"bootstrap", Kind::Bool},     {"trials", Kind::UInt},
      {"random_search", Kind::Bool},
  };
  return kinds;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
    throw std::invalid_argument("option " + key + ": expected a non-negative integer, got '" + v + "'");
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw std::invalid_argument("option " + key + ": value out of range");
  }
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size() && std::isfinite(d)) return d;
  } catch (const std::exception&) {
  }
  throw std::invalid_argument("option " + key + ": expected a number, got '" + v + "'");
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("option " + key + ": expected true or false, got '" + v + "'");
}

void validate_option(const std::string& key, const std::string& v) {
  const auto it = option_kinds().find(key);
  if (it == option_kinds().end()) throw std::invalid_argument("unknown option '" + key + "'");
  switch (it->second) {
    case Kind::UInt: parse_uint(key, v); break;
    case Kind::Real: parse_real(key, v); break;
    case Kind::Bool: parse_bool(key, v); break;
    case Kind::Text:
      if (key == "split" && v != "stratified" && v != "random")
        throw std::invalid_argument("option split: expected stratified or random");
      if (key == "bin_mode" && v != "equal_width" && v != "quantile")
        throw std::invalid_argument("option bin_mode: expected equal_width or quantile");
      if (key == "max_features") gf::parse_max_features(v);
      if (key == "features") gf::resolve_features(v);
      break;
  }
}

struct Options {
  const std::map<std::string, std::string>& m;

  bool has(const char* k) const { return m.count(k) != 0; }
  std::uint64_t u(const char* k, std::uint64_t d) const { return has(k) ? parse_uint(k, m.at(k)) : d; }
  double r(const char* k, double d) const { return has(k) ? parse_real(k, m.at(k)) : d; }
  bool b(const char* k, bool d) const { return has(k) ? parse_bool(k, m.at(k)) : d; }
  std::string t(const char* k, const std::string& d) const { return has(k) ? m.at(k) : d; }

  std::uint64_t seed() const { return u("seed", 0); }
  unsigned workers() const { return static_cast<unsigned>(u("workers", 1)); }

  gf::ScoringOptions scoring() const {
    gf::ScoringOptions s;
    s.batch_size = u("batch_size", s.batch_size);
    s.noise_sigma = r("noise_sigma", s.noise_sigma);
    s.perturb_eps = r("perturb_eps", s.perturb_eps);
    s.resolution = u("resolution", s.resolution);
    return s;
  }

  bool split_set() const { return has("seed") || has("split") || has("bins") || has("bin_mode"); }

  gf::SplitConfig split(gf::SplitConfig c = {}) const {
    c.seed = u("seed", c.seed);
    if (has("split")) c.stratified = m.at("split") == "stratified";
    c.bins = static_cast<int>(u("bins", static_cast<std::uint64_t>(c.bins)));
    if (has("bin_mode")) c.bin_mode = m.at("bin_mode") == "quantile" ? gf::BinMode::Quantile : gf::BinMode::EqualWidth;
    return c;
  }

  std::string features_text(const std::string& d) const { return t("features", d); }

  // hp preset (or tuned.json path), then per-key overrides. Without an hp
  // option, a preset feature set brings its own tuned settings.
  gf::HyperParams hp(const std::string& features_text, const std::string& fallback) const {
    gf::HyperParams h;
    const std::string src = t("hp", gf::is_feature_preset(features_text) && features_text != "all" ? features_text
                                                                                                   : fallback);
    if (src == "default" || src == "greenfactory" || src == "fast")
      h = gf::preset_hyperparams(src);
    else
      h = gf::load_tuned_json(src);
    h.n_estimators = static_cast<int>(u("n_estimators", static_cast<std::uint64_t>(h.n_estimators)));
    if (has("max_features")) h.max_features = gf::parse_max_features(m.at("max_features"));
    h.min_samples_split = static_cast<int>(u("min_samples_split", static_cast<std::uint64_t>(h.min_samples_split)));
    h.min_samples_leaf = static_cast<int>(u("min_samples_leaf", static_cast<std::uint64_t>(h.min_samples_leaf)));
    h.max_depth = static_cast<int>(u("max_depth", static_cast<std::uint64_t>(h.max_depth)));
    h.bootstrap = b("bootstrap", h.bootstrap);
    return h;
  }
};

std::vector<gf::SearchSpace> parse_spaces(const std::string& s) {
  if (s == "both") return {gf::SearchSpace::Tss, gf::SearchSpace::Sss};
  return {gf::parse_search_space(s)};
}

template <class Fn>
std::string to_text(Fn&& fn) {
  std::ostringstream ss;
  fn(ss);
  return ss.str();
}

std::string format_warnings(const std::vector<std::string>& w) {
  std::string s;
  for (const auto& line : w) s += "warning: " + line + "\n";
  return s;
}

}  // namespace

extern "C" {

const char* gf_version(void) { return "1.0.0"; }

const char* gf_status_name(gf_status s) {
  switch (s) {
    case GF_OK: return "ok";
    case GF_ERR_INVALID_ARGUMENT: return "invalid argument";
    case GF_ERR_SHAPE: return "shape error";
    case GF_ERR_CONTRACT: return "contract error";
    case GF_ERR_PARSE: return "parse error";
    case GF_ERR_CONFIG: return "configuration error";
    case GF_ERR_DATA: return "data error";
    case GF_ERR_IO: return "i/o error";
    case GF_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* gf_last_error(void) { return g_last_error.c_str(); }

void gf_string_free(char* s) { std::free(s); }

gf_status gf_context_create(gf_context** out) {
  GF_REQUIRE(out, "gf_context_create: out is null");
  return guarded([&] { *out = new gf_context(); });
}

void gf_context_destroy(gf_context* ctx) { delete ctx; }

gf_status gf_context_set_option(gf_context* ctx, const char* key, const char* value) {
  GF_REQUIRE(ctx && key && value, "gf_context_set_option: null argument");
  return guarded([&] {
    validate_option(key, value);
    ctx->options[key] = value;
  });
}

gf_status gf_context_get_option(const gf_context* ctx, const char* key, char** out) {
  GF_REQUIRE(ctx && key && out, "gf_context_get_option: null argument");
  const auto it = ctx->options.find(key);
  if (it == ctx->options.end()) return fail(GF_ERR_CONFIG, std::string("option '") + key + "' is not set");
  return guarded([&] { *out = dup_string(it->second); });
}

gf_status gf_context_load_config(gf_context* ctx, const char* path) {
  GF_REQUIRE(ctx && path, "gf_context_load_config: null argument");
  return guarded([&] {
    const gf::Config c = gf::Config::load(path);
    for (const auto& [k, v] : c.values()) {
      try {
        validate_option(k, v);
      } catch (const std::invalid_argument& e) {
        throw gf::ConfigError(std::string(path) + ": " + e.what());
      }
    }
    for (const auto& [k, v] : c.values()) ctx->options[k] = v;
  });
}

gf_status gf_context_load_registry(gf_context* ctx, const char* path) {
  GF_REQUIRE(ctx && path, "gf_context_load_registry: null argument");
  return guarded([&] {
    const gf::FormulaRegistry extra = gf::FormulaRegistry::load(path);
    gf::FormulaRegistry merged = ctx->registry;
    for (const auto& id : extra.ids()) merged.set(id, extra.source(id));
    ctx->registry = std::move(merged);
  });
}

gf_status gf_context_set_progress(gf_context* ctx, gf_progress_fn fn, void* user) {
  GF_REQUIRE(ctx, "gf_context_set_progress: null context");
  ctx->progress = fn;
  ctx->progress_user = user;
  return GF_OK;
}

gf_status gf_table_load(gf_context* ctx, const char* path, gf_table** out) {
  GF_REQUIRE(ctx && path && out, "gf_table_load: null argument");
  return guarded([&] { *out = new gf_table{gf::ScoreTable::load(path)}; });
}

gf_status gf_table_to_csv(gf_context* ctx, const gf_table* table, char** out) {
  GF_REQUIRE(ctx && table && out, "gf_table_to_csv: null argument");
  return guarded([&] { *out = dup_string(to_text([&](std::ostream& s) { table->table.write_csv(s); })); });
}

gf_status gf_table_save(gf_context* ctx, const gf_table* table, const char* path) {
  GF_REQUIRE(ctx && table && path, "gf_table_save: null argument");
  return guarded(
      [&] { gf::write_file_atomic(path, to_text([&](std::ostream& s) { table->table.write_csv(s); })); });
}

size_t gf_table_rows(const gf_table* table) { return table ? table->table.rows.size() : 0; }

gf_status gf_table_value(gf_context* ctx, const gf_table* table, size_t row, const char* column, double* out) {
  GF_REQUIRE(ctx && table && column && out, "gf_table_value: null argument");
  GF_REQUIRE(row < table->table.rows.size(), "gf_table_value: row out of range");
  return guarded([&] {
    const auto& r = table->table.rows[row];
    *out = std::string_view(column) == "accuracy" ? r.accuracy : r.feature(column);
  });
}

void gf_table_destroy(gf_table* table) { delete table; }

gf_status gf_collect(gf_context* ctx, const char* spaces, size_t n, const char* target_csv, gf_table** out,
                     char** timing_csv) {
  GF_REQUIRE(ctx && out, "gf_collect: null argument");
  return guarded([&] {
    const Options opt{ctx->options};
    gf::CollectOptions co;
    co.seed = opt.seed();
    co.workers = opt.workers();
    co.scoring = opt.scoring();
    co.n = n;
    if (ctx->progress) {
      auto fn = ctx->progress;
      void* user = ctx->progress_user;
      co.progress = [fn, user](std::size_t done, std::size_t total) { fn(done, total, user); };
    }
    std::vector<gf::ScoreJob> jobs;
    if (target_csv) {
      jobs = gf::jobs_from_targets(std::string(target_csv), co.seed);
    } else {
      co.spaces = parse_spaces(spaces ? spaces : "both");
      jobs = gf::sample_jobs(co);
    }
    gf::CollectResult res = gf::collect(jobs, ctx->registry, co);
    if (timing_csv) *timing_csv = dup_string(to_text([&](std::ostream& s) { gf::write_timing_csv(res.timing, s); }));
    *out = new gf_table{std::move(res.table)};
  });
}

gf_status gf_score_spec(gf_context* ctx, const char* spec, const char* dataset, char** out_csv) {
  GF_REQUIRE(ctx && spec && out_csv, "gf_score_spec: null argument");
  return guarded([&] {
    const Options opt{ctx->options};
    gf::ScoreJob job;
    job.spec = gf::parse_spec(spec);
    job.net_id = "net-0000";
    job.seed = gf::derive_seed({opt.seed(), 0x5c0e});
    job.datasets = {gf::parse_dataset(dataset ? dataset : "cifar10")};
    auto scores = gf::score_network(job, ctx->registry, gf::feature_names(), opt.scoring());
    gf::ScoreTable t;
    t.rows.push_back(std::move(scores.front().row));
    *out_csv = dup_string(to_text([&](std::ostream& s) { t.write_csv(s); }));
  });
}

gf_status gf_train(gf_context* ctx, const gf_table* table, gf_model** out, char** report_csv, char** text) {
  GF_REQUIRE(ctx && table && out, "gf_train: null argument");
  return guarded([&] {
    const Options opt{ctx->options};
    gf::TrainOptions to;
    const std::string ft = opt.features_text("greenfactory");
    to.features = gf::resolve_features(ft);
    to.hp = opt.hp(ft, "default");
    to.split = opt.split();
    to.forest_seed = opt.seed();
    to.threads = opt.workers();
    gf::TrainResult res = gf::train(table->table, to);
    put(report_csv, to_text([&](std::ostream& s) { gf::write_rmse_csv(res.rmse, s); }));
    put(text, "features (" + std::to_string(to.features.size()) + "): " + [&] {
      std::string s;
      for (const auto& f : to.features) s += (s.empty() ? "" : ",") + f;
      return s;
    }() + "\nhyperparameters: " + gf::to_string(to.hp) + "\n" + gf::format_rmse_text(res.rmse));
    *out = new gf_model{std::move(res.model)};
  });
}

gf_status gf_model_load(gf_context* ctx, const char* path, gf_model** out) {
  GF_REQUIRE(ctx && path && out, "gf_model_load: null argument");
  return guarded([&] {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw gf::IoError(std::string("cannot open ") + path);
    *out = new gf_model{gf::load_model(in)};
  });
}

gf_status gf_model_save(gf_context* ctx, const gf_model* model, const char* path) {
  GF_REQUIRE(ctx && model && path, "gf_model_save: null argument");
  return guarded(
      [&] { gf::write_file_atomic(path, to_text([&](std::ostream& s) { gf::save_model(model->model, s); })); });
}

size_t gf_model_feature_count(const gf_model* model) { return model ? model->model.n_features : 0; }

gf_status gf_model_predict(gf_context* ctx, const gf_model* model, const double* rows, size_t n_rows,
                           size_t n_features, double* out) {
  GF_REQUIRE(ctx && model && (rows || n_rows == 0) && (out || n_rows == 0), "gf_model_predict: null argument");
  if (n_features != model->model.n_features)
    return fail(GF_ERR_DATA, "gf_model_predict: model expects " + std::to_string(model->model.n_features) +
                                 " features, got " + std::to_string(n_features));
  return guarded([&] {
    for (size_t i = 0; i < n_rows; ++i) out[i] = model->model.predict_row(rows + i * n_features);
  });
}

void gf_model_destroy(gf_model* model) { delete model; }

gf_status gf_eval(gf_context* ctx, const gf_model* model, const gf_table* table, char** correlation_csv,
                  char** rmse_csv, char** text) {
  GF_REQUIRE(ctx && model && table, "gf_eval: null argument");
  return guarded([&] {
    const Options opt{ctx->options};
    gf::SplitConfig split = gf::stored_split(model->model, gf::SplitConfig{});
    if (opt.split_set()) split = opt.split(split);
    const gf::EvalResult res = gf::evaluate(model->model, table->table, split);
    put(correlation_csv, to_text([&](std::ostream& s) { gf::write_report_csv(res.correlations, s); }));
    put(rmse_csv, to_text([&](std::ostream& s) { gf::write_rmse_csv(res.rmse, s); }));
    put(text, format_warnings(res.warnings) + std::string("test-slice correlations (") +
                  (split.stratified ? "stratified" : "random") + " split)\n" +
                  gf::format_report_text(res.correlations) + "\n" + gf::format_rmse_text(res.rmse));
  });
}

gf_status gf_report(gf_context* ctx, const gf_table* table, int test_only, char** correlation_csv, char** text) {
  GF_REQUIRE(ctx && table, "gf_report: null argument");
  return guarded([&] {
    const Options opt{ctx->options};
    std::vector<std::size_t> rows;
    if (test_only) {
      rows = gf::split_table(table->table, opt.split()).rows(gf::Slice::Test);
      if (rows.empty()) throw gf::DataError("test slice is empty");
    }
    const gf::EvalResult res = gf::report(table->table, rows);
    put(correlation_csv, to_text([&](std::ostream& s) { gf::write_report_csv(res.correlations, s); }));
    put(text, format_warnings(res.warnings) + gf::format_report_text(res.correlations));
  });
}

gf_status gf_rfe(gf_context* ctx, const gf_table* table, const char* timing_path, char** rfe_csv,
                 char** selection_csv, char** text) {
  GF_REQUIRE(ctx && table && timing_path, "gf_rfe: null argument");
  return guarded([&] {
    const Options opt{ctx->options};
    gf::RfeOptions ro;
    const std::string ft = opt.features_text("all");
    ro.features = gf::resolve_features(ft);
    ro.hp = opt.hp(ft, "default");
    ro.split = opt.split();
    ro.seed = opt.seed();
    ro.threads = opt.workers();
    const gf::RfeResult res = gf::run_rfe(table->table, gf::load_timing_csv(timing_path), ro);
    put(rfe_csv, to_text([&](std::ostream& s) { gf::write_rfe_csv(res.rows, s); }));
    put(selection_csv, to_text([&](std::ostream& s) { gf::write_rfe_selection_csv(res, ro.features, s); }));
    put(text, gf::format_rfe_text(res.rows));
  });
}

gf_status gf_rfe_rescore(gf_context* ctx, const char* rfe_csv_text, char** out_csv) {
  GF_REQUIRE(ctx && rfe_csv_text && out_csv, "gf_rfe_rescore: null argument");
  return guarded([&] {
    std::istringstream in(rfe_csv_text);
    const auto rows = gf::rescore_rfe_csv(in);
    *out_csv = dup_string(to_text([&](std::ostream& s) { gf::write_rfe_csv(rows, s); }));
  });
}

gf_status gf_tune(gf_context* ctx, const gf_table* table, char** tuned_json, char** trial_log_csv) {
  GF_REQUIRE(ctx && table, "gf_tune: null argument");
  return guarded([&] {
    const Options opt{ctx->options};
    gf::TuneOptions to;
    to.trials = opt.u("trials", to.trials);
    to.seed = opt.seed();
    to.features = gf::resolve_features(opt.features_text("greenfactory"));
    to.split = opt.split();
    to.threads = opt.workers();
    to.random_search = opt.b("random_search", false);
    if (ctx->progress) {
      auto fn = ctx->progress;
      void* user = ctx->progress_user;
      const std::size_t total = to.trials;
      to.on_trial = [fn, user, total](const gf::TpeTrial& t) { fn(t.number + 1, total, user); };
    }
    const gf::TuneResult res = gf::tune(table->table, to);
    put(tuned_json, gf::tuned_json(res));
    put(trial_log_csv, to_text([&](std::ostream& s) { gf::write_trial_log(res, s); }));
  });
}

gf_status gf_tradeoff_score(const double* rmse, const double* time, size_t n, double* out) {
  GF_REQUIRE(rmse && time && out, "gf_tradeoff_score: null argument");
  return guarded([&] {
    const auto s = gf::tradeoff_score(std::vector<double>(rmse, rmse + n), std::vector<double>(time, time + n));
    std::copy(s.begin(), s.end(), out);
  });
}

gf_status gf_kendall_tau(const double* x, const double* y, size_t n, double* out) {
  GF_REQUIRE(x && y && out, "gf_kendall_tau: null argument");
  return guarded([&] { *out = gf::kendall_tau(std::vector<double>(x, x + n), std::vector<double>(y, y + n)); });
}

gf_status gf_spearman_rho(const double* x, const double* y, size_t n, double* out) {
  GF_REQUIRE(x && y && out, "gf_spearman_rho: null argument");
  return guarded([&] { *out = gf::spearman_rho(std::vector<double>(x, x + n), std::vector<double>(y, y + n)); });
}

gf_status gf_formula_canonical(const char* text, char** out) {
  GF_REQUIRE(text && out, "gf_formula_canonical: null argument");
  return guarded([&] { *out = dup_string(gf::pretty_print(gf::parse_formula(text))); });
}

gf_status gf_write_file(const char* path, const char* text) {
  GF_REQUIRE(path && text, "gf_write_file: null argument");
  return guarded([&] { gf::write_file_atomic(path, text); });
}

}  // extern "C"
