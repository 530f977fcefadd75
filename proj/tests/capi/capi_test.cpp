// Exercises the C interface the way a foreign caller would: plain asserts,
// status codes and caller-owned strings.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#include "greenfactory/greenfactory.h"

namespace {

int g_failures = 0;

#define EXPECT(cond)                                                       \
  do {                                                                     \
    if (!(cond)) {                                                         \
      std::fprintf(stderr, "%s:%d: check failed: %s\n", __FILE__, __LINE__, #cond); \
      ++g_failures;                                                        \
    }                                                                      \
  } while (0)

#define EXPECT_OK(call)                                                                  \
  do {                                                                                   \
    const gf_status s_ = (call);                                                         \
    if (s_ != GF_OK) {                                                                   \
      std::fprintf(stderr, "%s:%d: %s -> %s: %s\n", __FILE__, __LINE__, #call, gf_status_name(s_), \
                   gf_last_error());                                                     \
      ++g_failures;                                                                      \
    }                                                                                    \
  } while (0)

std::string take(char* p) {
  std::string s = p ? p : "";
  gf_string_free(p);
  return s;
}

bool contains(const std::string& s, const char* what) { return s.find(what) != std::string::npos; }

void statuses() {
  EXPECT(std::strcmp(gf_status_name(GF_OK), "ok") == 0);
  for (int s = GF_OK; s <= GF_ERR_INTERNAL; ++s)
    EXPECT(std::strcmp(gf_status_name(static_cast<gf_status>(s)), "unknown status") != 0);
  EXPECT(std::strcmp(gf_status_name(static_cast<gf_status>(99)), "unknown status") == 0);
  EXPECT(std::strlen(gf_version()) > 0);
  EXPECT(gf_last_error() != nullptr);
  gf_string_free(nullptr);
}

void options() {
  EXPECT(gf_context_create(nullptr) == GF_ERR_INVALID_ARGUMENT);
  gf_context* ctx = nullptr;
  EXPECT_OK(gf_context_create(&ctx));
  EXPECT_OK(gf_context_set_option(ctx, "seed", "42"));
  char* v = nullptr;
  EXPECT_OK(gf_context_get_option(ctx, "seed", &v));
  EXPECT(take(v) == "42");
  EXPECT(gf_context_get_option(ctx, "workers", &v) == GF_ERR_CONFIG);

  EXPECT(gf_context_set_option(ctx, "bogus", "1") == GF_ERR_INVALID_ARGUMENT);
  EXPECT(contains(gf_last_error(), "bogus"));
  EXPECT(gf_context_set_option(ctx, "seed", "-3") == GF_ERR_INVALID_ARGUMENT);
  EXPECT(gf_context_set_option(ctx, "noise_sigma", "abc") == GF_ERR_INVALID_ARGUMENT);
  EXPECT(gf_context_set_option(ctx, "bootstrap", "maybe") == GF_ERR_INVALID_ARGUMENT);
  EXPECT(gf_context_set_option(ctx, "split", "sideways") == GF_ERR_INVALID_ARGUMENT);
  EXPECT(gf_context_set_option(ctx, "features", "naswot,nope") != GF_OK);
  EXPECT(gf_context_set_option(ctx, "max_features", "cube") != GF_OK);
  EXPECT_OK(gf_context_set_option(ctx, "max_features", "log2"));
  EXPECT_OK(gf_context_set_option(ctx, "features", "fast"));
  EXPECT(gf_context_set_option(ctx, nullptr, "1") == GF_ERR_INVALID_ARGUMENT);

  // The rejected values above never replaced the stored one.
  EXPECT_OK(gf_context_get_option(ctx, "seed", &v));
  EXPECT(take(v) == "42");

  EXPECT(gf_context_load_config(ctx, "/nonexistent/gf.conf") == GF_ERR_IO);
  EXPECT_OK(gf_write_file("capi_bad.conf", "seed = 1\nflux = 2\n"));
  EXPECT(gf_context_load_config(ctx, "capi_bad.conf") == GF_ERR_CONFIG);
  EXPECT_OK(gf_write_file("capi.conf", "# probes\nresolution = 8\nbatch_size = 4\n"));
  EXPECT_OK(gf_context_load_config(ctx, "capi.conf"));
  EXPECT_OK(gf_context_get_option(ctx, "resolution", &v));
  EXPECT(take(v) == "8");
  gf_context_destroy(ctx);
  gf_context_destroy(nullptr);
}

void numerics() {
  // Concordant pairs 5 of 6 with one swap: tau = (5 - 1) / 6.
  const double x[] = {1, 2, 3, 4};
  const double y[] = {1, 3, 2, 4};
  double tau = 0, rho = 0;
  EXPECT_OK(gf_kendall_tau(x, y, 4, &tau));
  EXPECT(std::fabs(tau - 4.0 / 6.0) < 1e-15);
  EXPECT_OK(gf_spearman_rho(x, y, 4, &rho));
  EXPECT(std::fabs(rho - 0.8) < 1e-15);
  const double flat[] = {2, 2, 2, 2};
  EXPECT_OK(gf_kendall_tau(x, flat, 4, &tau));
  EXPECT(std::isnan(tau));
  EXPECT(gf_kendall_tau(x, y, 1, &tau) != GF_OK);
  EXPECT(gf_spearman_rho(nullptr, y, 4, &rho) == GF_ERR_INVALID_ARGUMENT);

  // First and last rows of the published feature-elimination table.
  const double rmse[] = {2.6627, 7.2564};
  const double time[] = {12.3, 0.0};
  double score[2] = {};
  EXPECT_OK(gf_tradeoff_score(rmse, time, 2, score));
  EXPECT(score[0] == 0.5);
  EXPECT(score[1] == 0.5);
  const double rmse3[] = {1.0, 2.0, 3.0};
  const double time3[] = {3.0, 1.0, 2.0};
  double s3[3] = {};
  EXPECT_OK(gf_tradeoff_score(rmse3, time3, 3, s3));
  EXPECT(std::fabs(s3[0] - 0.5) < 1e-12);
  EXPECT(std::fabs(s3[1] - 0.25) < 1e-12);
  EXPECT(std::fabs(s3[2] - 0.75) < 1e-12);

  char* out = nullptr;
  EXPECT_OK(gf_formula_canonical("  l1_norm( element_wise_product(pass_grad,pass_wt) )", &out));
  const std::string canon = take(out);
  EXPECT(!canon.empty());
  EXPECT_OK(gf_formula_canonical(canon.c_str(), &out));
  EXPECT(take(out) == canon);
  EXPECT(gf_formula_canonical("mean(", &out) == GF_ERR_PARSE);
  EXPECT(gf_formula_canonical("no_such_op(pass_grad)", &out) == GF_ERR_PARSE);
  EXPECT(gf_formula_canonical("l1_norm(pass_clean_grad)", &out) == GF_ERR_PARSE);
}

void scoring() {
  gf_context* ctx = nullptr;
  EXPECT_OK(gf_context_create(&ctx));
  EXPECT_OK(gf_context_set_option(ctx, "resolution", "8"));
  EXPECT_OK(gf_context_set_option(ctx, "batch_size", "4"));
  char* a = nullptr;
  char* b = nullptr;
  const char* spec = "tss|skip,conv3x3,none,conv1x1,skip,avgpool3x3";
  EXPECT_OK(gf_score_spec(ctx, spec, "cifar100", &a));
  EXPECT_OK(gf_score_spec(ctx, spec, "cifar100", &b));
  const std::string ra = take(a), rb = take(b);
  EXPECT(ra == rb);
  EXPECT(contains(ra, "net_id,"));
  EXPECT(contains(ra, "cifar100"));
  EXPECT(gf_score_spec(ctx, "tss|skip,conv3x3", "cifar10", &a) == GF_ERR_PARSE);
  EXPECT(gf_score_spec(ctx, spec, "mnist", &a) != GF_OK);
  gf_context_destroy(ctx);
}

std::size_t g_progress_calls = 0;
void on_progress(size_t done, size_t total, void* user) {
  ++*static_cast<std::size_t*>(user);
  EXPECT(done <= total);
}

void end_to_end() {
  gf_context* ctx = nullptr;
  EXPECT_OK(gf_context_create(&ctx));
  EXPECT_OK(gf_context_set_option(ctx, "resolution", "8"));
  EXPECT_OK(gf_context_set_option(ctx, "batch_size", "4"));
  EXPECT_OK(gf_context_set_option(ctx, "seed", "5"));
  EXPECT_OK(gf_context_set_option(ctx, "n_estimators", "20"));
  EXPECT_OK(gf_context_set_progress(ctx, on_progress, &g_progress_calls));

  gf_table* table = nullptr;
  char* timing = nullptr;
  EXPECT(gf_collect(ctx, "everything", 4, nullptr, &table, nullptr) != GF_OK);
  EXPECT_OK(gf_collect(ctx, "tss", 20, nullptr, &table, &timing));
  if (!table) {
    ++g_failures;
    gf_context_destroy(ctx);
    return;
  }
  EXPECT(g_progress_calls > 0);
  EXPECT(gf_table_rows(table) == 60);
  EXPECT(contains(take(timing), "group,seconds,features"));
  double v = 0;
  EXPECT_OK(gf_table_value(ctx, table, 0, "accuracy", &v));
  EXPECT(std::isfinite(v));
  EXPECT_OK(gf_table_value(ctx, table, 0, "cifar10", &v));
  EXPECT(v == 0.0 || v == 1.0);
  EXPECT(gf_table_value(ctx, table, 0, "nope", &v) == GF_ERR_DATA);
  EXPECT(gf_table_value(ctx, table, 60, "flops", &v) == GF_ERR_INVALID_ARGUMENT);

  EXPECT_OK(gf_table_save(ctx, table, "capi_scores.csv"));
  gf_table* loaded = nullptr;
  EXPECT_OK(gf_table_load(ctx, "capi_scores.csv", &loaded));
  char* c1 = nullptr;
  char* c2 = nullptr;
  EXPECT_OK(gf_table_to_csv(ctx, table, &c1));
  EXPECT_OK(gf_table_to_csv(ctx, loaded, &c2));
  EXPECT(take(c1) == take(c2));
  gf_table_destroy(loaded);
  EXPECT(gf_table_load(ctx, "/nonexistent/scores.csv", &loaded) == GF_ERR_IO);

  gf_model* model = nullptr;
  char* report = nullptr;
  char* text = nullptr;
  EXPECT_OK(gf_train(ctx, table, &model, &report, &text));
  EXPECT(contains(take(report), "slice"));
  EXPECT(contains(take(text), "n_estimators"));
  if (model) {
    const std::size_t k = gf_model_feature_count(model);
    EXPECT(k == 25);
    std::vector<double> rows(2 * k, 0.0);
    double pred[2] = {};
    EXPECT_OK(gf_model_predict(ctx, model, rows.data(), 2, k, pred));
    EXPECT(std::isfinite(pred[0]) && pred[0] == pred[1]);
    EXPECT(gf_model_predict(ctx, model, rows.data(), 2, k - 1, pred) == GF_ERR_DATA);

    EXPECT_OK(gf_model_save(ctx, model, "capi_model.gfm"));
    gf_model* back = nullptr;
    EXPECT_OK(gf_model_load(ctx, "capi_model.gfm", &back));
    double pred2[2] = {};
    EXPECT_OK(gf_model_predict(ctx, back, rows.data(), 2, k, pred2));
    EXPECT(pred2[0] == pred[0]);

    char* corr = nullptr;
    char* rmse = nullptr;
    EXPECT_OK(gf_eval(ctx, back, table, &corr, &rmse, &text));
    const std::string corr_csv = take(corr);
    EXPECT(contains(corr_csv, "ensemble"));
    EXPECT(contains(take(rmse), "test"));
    EXPECT(contains(take(text), "test-slice correlations"));
    gf_model_destroy(back);
    gf_model_destroy(model);
  }
  EXPECT(gf_model_load(ctx, "capi_scores.csv", &model) != GF_OK);

  char* corr = nullptr;
  EXPECT_OK(gf_report(ctx, table, 1, &corr, &text));
  EXPECT(contains(take(corr), "proxy_id,"));
  gf_string_free(text);

  gf_table_destroy(table);
  gf_context_destroy(ctx);
}

void rescoring() {
  gf_context* ctx = nullptr;
  EXPECT_OK(gf_context_create(&ctx));
  char* out = nullptr;
  EXPECT_OK(gf_rfe_rescore(ctx, "k,rmse,time_seconds\n2,3.0,0.5\n1,4.0,0.0\n", &out));
  EXPECT(contains(take(out), "score"));
  EXPECT(gf_rfe_rescore(ctx, "k,rmse\n1,2\n", &out) == GF_ERR_DATA);
  EXPECT(gf_write_file("/nonexistent/dir/x.txt", "x") == GF_ERR_IO);
  gf_context_destroy(ctx);
}

}  // namespace

int main() {
  statuses();
  options();
  numerics();
  scoring();
  end_to_end();
  rescoring();
  if (g_failures) {
    std::fprintf(stderr, "%d check(s) failed\n", g_failures);
    return 1;
  }
  std::puts("c api: all checks passed");
  return 0;
}
