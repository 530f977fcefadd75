#ifndef GREENFACTORY_H
#define GREENFACTORY_H

/*
 * C interface to the greenfactory library.
 *
 * Every function returns a gf_status. On failure the message is kept in a
 * thread-local slot read by gf_last_error(). Strings returned through char**
 * out-parameters are owned by the caller and released with gf_string_free().
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define GF_API __declspec(dllexport)
#elif defined(GF_BUILDING_LIBRARY)
#define GF_API __attribute__((visibility("default")))
#else
#define GF_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gf_status {
  GF_OK = 0,
  GF_ERR_INVALID_ARGUMENT = 1, /* null pointer, bad option key or value */
  GF_ERR_SHAPE = 2,
  GF_ERR_CONTRACT = 3,
  GF_ERR_PARSE = 4,
  GF_ERR_CONFIG = 5,
  GF_ERR_DATA = 6,
  GF_ERR_IO = 7,
  GF_ERR_INTERNAL = 8
} gf_status;

typedef struct gf_context gf_context;
typedef struct gf_table gf_table;
typedef struct gf_model gf_model;

typedef void (*gf_progress_fn)(size_t done, size_t total, void* user);

GF_API const char* gf_version(void);
GF_API const char* gf_status_name(gf_status status);
/* Message of the last failure on this thread. Never null. */
GF_API const char* gf_last_error(void);
GF_API void gf_string_free(char* s);

/* ---- context: options and the formula registry ---- */

GF_API gf_status gf_context_create(gf_context** out);
GF_API void gf_context_destroy(gf_context* ctx);

/*
 * Option keys (values are text):
 *   seed, workers, batch_size, noise_sigma, perturb_eps, resolution,
 *   split (stratified|random), bins, bin_mode (equal_width|quantile),
 *   features (preset or comma list), hp (default|greenfactory|fast or a
 *   tuned.json path), n_estimators, max_features, min_samples_split,
 *   min_samples_leaf, max_depth, bootstrap (true|false), trials,
 *   random_search (true|false).
 * Individual hyperparameter keys override the ones taken from hp.
 */
GF_API gf_status gf_context_set_option(gf_context* ctx, const char* key, const char* value);
GF_API gf_status gf_context_get_option(const gf_context* ctx, const char* key, char** out);
/* Applies every `key = value` line of a config file. */
GF_API gf_status gf_context_load_config(gf_context* ctx, const char* path);
/* Overlays formula entries from a registry file onto the built-in ones. */
GF_API gf_status gf_context_load_registry(gf_context* ctx, const char* path);
GF_API gf_status gf_context_set_progress(gf_context* ctx, gf_progress_fn fn, void* user);

/* ---- score tables ---- */

GF_API gf_status gf_table_load(gf_context* ctx, const char* path, gf_table** out);
GF_API gf_status gf_table_save(gf_context* ctx, const gf_table* table, const char* path);
GF_API gf_status gf_table_to_csv(gf_context* ctx, const gf_table* table, char** out);
GF_API size_t gf_table_rows(const gf_table* table);
GF_API gf_status gf_table_value(gf_context* ctx, const gf_table* table, size_t row, const char* column, double* out);
GF_API void gf_table_destroy(gf_table* table);

/*
 * Samples n networks per space ("tss", "sss" or "both") and scores them on
 * the three datasets. With target_csv set, scores the listed (spec, dataset)
 * pairs instead and takes their accuracies. timing_csv, when non-null,
 * receives the per-group timing sidecar text.
 */
GF_API gf_status gf_collect(gf_context* ctx, const char* spaces, size_t n, const char* target_csv, gf_table** out,
                            char** timing_csv);

/* One table row (header included) for a spec string on one dataset. */
GF_API gf_status gf_score_spec(gf_context* ctx, const char* spec, const char* dataset, char** out_csv);

/* ---- models ---- */

/* Trains on the table's train slice; report_csv gets RMSE per slice/group. */
GF_API gf_status gf_train(gf_context* ctx, const gf_table* table, gf_model** out, char** report_csv, char** text);
GF_API gf_status gf_model_load(gf_context* ctx, const char* path, gf_model** out);
GF_API gf_status gf_model_save(gf_context* ctx, const gf_model* model, const char* path);
GF_API size_t gf_model_feature_count(const gf_model* model);
GF_API gf_status gf_model_predict(gf_context* ctx, const gf_model* model, const double* rows, size_t n_rows,
                                  size_t n_features, double* out);
GF_API void gf_model_destroy(gf_model* model);

/* Correlations on the test slice (ensemble included) and RMSE per slice.
 * The split stored with the model is used unless split options were set. */
GF_API gf_status gf_eval(gf_context* ctx, const gf_model* model, const gf_table* table, char** correlation_csv,
                         char** rmse_csv, char** text);

/* Proxy correlations over all rows, or over the test slice when test_only. */
GF_API gf_status gf_report(gf_context* ctx, const gf_table* table, int test_only, char** correlation_csv,
                           char** text);

/* ---- feature selection and tuning ---- */

GF_API gf_status gf_rfe(gf_context* ctx, const gf_table* table, const char* timing_path, char** rfe_csv,
                        char** selection_csv, char** text);
/* Recomputes the score column of an RFE csv (columns k, rmse, time_seconds). */
GF_API gf_status gf_rfe_rescore(gf_context* ctx, const char* rfe_csv_text, char** out_csv);
GF_API gf_status gf_tune(gf_context* ctx, const gf_table* table, char** tuned_json, char** trial_log_csv);

/* ---- small numeric entry points ---- */

GF_API gf_status gf_tradeoff_score(const double* rmse, const double* time, size_t n, double* out);
GF_API gf_status gf_kendall_tau(const double* x, const double* y, size_t n, double* out);
GF_API gf_status gf_spearman_rho(const double* x, const double* y, size_t n, double* out);
/* Parses a formula program and returns its canonical text. */
GF_API gf_status gf_formula_canonical(const char* text, char** out);

/* Writes text to path through a temporary file and a rename. */
GF_API gf_status gf_write_file(const char* path, const char* text);

#ifdef __cplusplus
}
#endif

#endif
