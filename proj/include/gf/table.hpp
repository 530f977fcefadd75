#pragma once

// The score table: one row per (network, dataset) with the 26 feature columns
// and the target accuracy, plus correlation reports over it.

#include <array>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "gf/arch.hpp"
#include "gf/linalg.hpp"
#include "gf/metrics.hpp"

namespace gf {

inline constexpr std::size_t kProxyCount = 21;
inline constexpr std::array<std::string_view, kProxyCount> kProxyIds = {
    "synflow", "gradnorm", "naswot", "tenas", "zennas", "zico", "eznas",
    "aznas", "az_expressivity", "az_progressivity", "az_trainability",
    "gm_a", "gm_b", "gm_c", "gm_d", "gm_e", "gm_f", "gm_g", "gm_h", "gm_i", "gm_j",
};

inline constexpr std::size_t kFeatureCount = 26;

// cifar10, cifar100, imagenet16, the 21 proxies, params, flops.
const std::vector<std::string>& feature_names();
// Full CSV header: net_id, spec, search_space, features..., accuracy.
const std::vector<std::string>& table_header();

struct ScoreRow {
  std::string net_id;
  std::string spec;
  SearchSpace space = SearchSpace::Tss;
  Dataset dataset = Dataset::Cifar10;
  std::array<double, kProxyCount> proxies{};
  double params = 0.0;
  double flops = 0.0;
  double accuracy = 0.0;

  std::array<double, kFeatureCount> features() const;
  double feature(std::string_view name) const;  // DataError for unknown names
  void set_proxy(std::string_view id, double value);
};

struct ScoreTable {
  std::vector<ScoreRow> rows;

  void write_csv(std::ostream& out) const;
  // DataError listing missing header columns, or naming the bad row/column.
  static ScoreTable read_csv(std::istream& in);
  static ScoreTable load(const std::string& path);

  std::vector<double> column(std::string_view feature) const;
  std::vector<double> targets() const;
  linalg::Matrix matrix(const std::vector<std::string>& features) const;
};

// Throws DataError listing every name that is not a feature column.
void check_feature_names(const std::vector<std::string>& names);

std::string format_double(double v);  // %.17g, "nan"/"inf" spelled as such

// One CSV line; quotes fields containing separators.
std::string csv_line(const std::vector<std::string>& fields);
std::vector<std::string> split_csv_line(std::string_view line);

struct CorrelationRow {
  std::string proxy_id;
  std::string search_space;
  std::string dataset;
  double kendall_abs = 0.0;
  double spearman_abs = 0.0;
  std::size_t n = 0;
};

struct NamedColumn {
  std::string id;
  std::vector<double> values;  // one per table row
};

// |tau| and |rho| of each column against accuracy over `rows`, grouped by
// (search space, dataset). Groups with fewer than 2 rows are skipped and
// noted in `warnings`.
std::vector<CorrelationRow> correlation_report(const ScoreTable& table, const std::vector<NamedColumn>& columns,
                                               const std::vector<std::size_t>& rows,
                                               std::vector<std::string>* warnings = nullptr);
void write_report_csv(const std::vector<CorrelationRow>& report, std::ostream& out);
std::string format_report_text(const std::vector<CorrelationRow>& report);

}  // namespace gf
