#include "gf/table.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "gf/error.hpp"

namespace gf {

const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (auto d : kDatasetNames) v.emplace_back(d);
    for (auto p : kProxyIds) v.emplace_back(p);
    v.emplace_back("params");
    v.emplace_back("flops");
    return v;
  }();
  return names;
}

const std::vector<std::string>& table_header() {
  static const std::vector<std::string> header = [] {
    std::vector<std::string> v = {"net_id", "spec", "search_space"};
    for (const auto& f : feature_names()) v.push_back(f);
    v.emplace_back("accuracy");
    return v;
  }();
  return header;
}

namespace {

std::size_t feature_index(std::string_view name) {
  const auto& f = feature_names();
  const auto it = std::find(f.begin(), f.end(), name);
  if (it == f.end()) throw DataError("unknown feature '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - f.begin());
}

}  // namespace

std::array<double, kFeatureCount> ScoreRow::features() const {
  std::array<double, kFeatureCount> v{};
  v[static_cast<std::size_t>(dataset)] = 1.0;
  for (std::size_t i = 0; i < kProxyCount; ++i) v[3 + i] = proxies[i];
  v[3 + kProxyCount] = params;
  v[4 + kProxyCount] = flops;
  return v;
}

double ScoreRow::feature(std::string_view name) const { return features()[feature_index(name)]; }

void ScoreRow::set_proxy(std::string_view id, double value) {
  const auto it = std::find(kProxyIds.begin(), kProxyIds.end(), id);
  if (it == kProxyIds.end()) throw DataError("unknown proxy '" + std::string(id) + "'");
  proxies[static_cast<std::size_t>(it - kProxyIds.begin())] = value;
}

void check_feature_names(const std::vector<std::string>& names) {
  std::string missing;
  const auto& f = feature_names();
  for (const auto& n : names)
    if (std::find(f.begin(), f.end(), n) == f.end()) missing += (missing.empty() ? "" : ", ") + n;
  if (!missing.empty()) throw DataError("features not in table header: " + missing);
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_line(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    const auto& f = fields[i];
    if (f.find_first_of(",\"\n") == std::string::npos) {
      out += f;
    } else {
      out += '"';
      for (char c : f) {
        if (c == '"') out += '"';
        out += c;
      }
      out += '"';
    }
  }
  return out;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

void ScoreTable::write_csv(std::ostream& out) const {
  out << csv_line(table_header()) << '\n';
  for (const auto& r : rows) {
    std::vector<std::string> f = {r.net_id, r.spec, std::string(to_string(r.space))};
    for (double v : r.features()) f.push_back(format_double(v));
    f.push_back(format_double(r.accuracy));
    out << csv_line(f) << '\n';
  }
}

ScoreTable ScoreTable::read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("score table: empty input");
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  std::string missing;
  for (const auto& h : table_header())
    if (!col.count(h)) missing += (missing.empty() ? "" : ", ") + h;
  if (!missing.empty()) throw DataError("score table: missing columns: " + missing);

  ScoreTable t;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size())
      throw DataError("score table line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                      " fields, got " + std::to_string(f.size()));
    auto num = [&](const std::string& name) {
      const std::string& s = f[col.at(name)];
      try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size()) return v;
      } catch (const std::exception&) {
      }
      throw DataError("score table line " + std::to_string(line_no) + ": column " + name + ": not a number '" + s +
                      "'");
    };
    ScoreRow r;
    r.net_id = f[col.at("net_id")];
    r.spec = f[col.at("spec")];
    try {
      r.space = parse_search_space(f[col.at("search_space")]);
    } catch (const Error& e) {
      throw DataError("score table line " + std::to_string(line_no) + ": " + e.what());
    }
    int hot = -1;
    for (std::size_t d = 0; d < kDatasetNames.size(); ++d) {
      const double v = num(std::string(kDatasetNames[d]));
      if (v == 1.0) {
        if (hot >= 0) throw DataError("score table line " + std::to_string(line_no) + ": several dataset flags set");
        hot = static_cast<int>(d);
      } else if (v != 0.0) {
        throw DataError("score table line " + std::to_string(line_no) + ": dataset flags must be 0 or 1");
      }
    }
    if (hot < 0) throw DataError("score table line " + std::to_string(line_no) + ": no dataset flag set");
    r.dataset = static_cast<Dataset>(hot);
    for (std::size_t p = 0; p < kProxyCount; ++p) r.proxies[p] = num(std::string(kProxyIds[p]));
    r.params = num("params");
    r.flops = num("flops");
    r.accuracy = num("accuracy");
    t.rows.push_back(std::move(r));
  }
  return t;
}

ScoreTable ScoreTable::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return read_csv(in);
}

std::vector<double> ScoreTable::column(std::string_view feature) const {
  const std::size_t j = feature_index(feature);
  std::vector<double> v;
  v.reserve(rows.size());
  for (const auto& r : rows) v.push_back(r.features()[j]);
  return v;
}

std::vector<double> ScoreTable::targets() const {
  std::vector<double> v;
  v.reserve(rows.size());
  for (const auto& r : rows) v.push_back(r.accuracy);
  return v;
}

linalg::Matrix ScoreTable::matrix(const std::vector<std::string>& features) const {
  check_feature_names(features);
  std::vector<std::size_t> idx;
  for (const auto& f : features) idx.push_back(feature_index(f));
  linalg::Matrix m(rows.size(), idx.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto all = rows[i].features();
    for (std::size_t j = 0; j < idx.size(); ++j) m(i, j) = all[idx[j]];
  }
  return m;
}

std::vector<CorrelationRow> correlation_report(const ScoreTable& table, const std::vector<NamedColumn>& columns,
                                               const std::vector<std::size_t>& rows,
                                               std::vector<std::string>* warnings) {
  std::vector<CorrelationRow> out;
  for (const auto& c : columns)
    if (c.values.size() != table.rows.size())
      throw DataError("column '" + c.id + "' has " + std::to_string(c.values.size()) + " values for " +
                      std::to_string(table.rows.size()) + " rows");
  for (const auto& c : columns)
    for (SearchSpace space : {SearchSpace::Tss, SearchSpace::Sss})
      for (std::size_t d = 0; d < kDatasetNames.size(); ++d) {
        std::vector<double> x, y;
        bool present = false;
        for (std::size_t r : rows) {
          const ScoreRow& row = table.rows.at(r);
          if (row.space != space || row.dataset != static_cast<Dataset>(d)) continue;
          present = true;
          x.push_back(c.values[r]);
          y.push_back(row.accuracy);
        }
        if (!present) continue;
        if (x.size() < 2) {
          if (warnings)
            warnings->push_back("group " + std::string(to_string(space)) + "/" + std::string(kDatasetNames[d]) +
                                " has fewer than 2 rows; skipped for " + c.id);
          continue;
        }
        out.push_back({c.id, std::string(to_string(space)), std::string(kDatasetNames[d]),
                       std::fabs(kendall_tau(x, y)), std::fabs(spearman_rho(x, y)), x.size()});
      }
  return out;
}

void write_report_csv(const std::vector<CorrelationRow>& report, std::ostream& out) {
  out << "proxy_id,search_space,dataset,kendall_abs,spearman_abs,n\n";
  for (const auto& r : report)
    out << csv_line({r.proxy_id, r.search_space, r.dataset, format_double(r.kendall_abs),
                     format_double(r.spearman_abs), std::to_string(r.n)})
        << '\n';
}

std::string format_report_text(const std::vector<CorrelationRow>& report) {
  std::size_t w = 8;
  for (const auto& r : report) w = std::max(w, r.proxy_id.size());
  std::ostringstream ss;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-*s  %-5s  %-10s  %7s  %7s  %5s\n", static_cast<int>(w), "proxy", "space",
                "dataset", "|tau|", "|rho|", "n");
  ss << buf;
  for (const auto& r : report) {
    std::snprintf(buf, sizeof buf, "%-*s  %-5s  %-10s  %7.3f  %7.3f  %5zu\n", static_cast<int>(w), r.proxy_id.c_str(),
                  r.search_space.c_str(), r.dataset.c_str(), r.kendall_abs, r.spearman_abs, r.n);
    ss << buf;
  }
  return ss.str();
}

}  // namespace gf
