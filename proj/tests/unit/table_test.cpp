#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "doctest.h"
#include "gf/error.hpp"
#include "gf/table.hpp"

using namespace gf;

namespace {

ScoreTable random_table(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  ScoreTable t;
  for (std::size_t i = 0; i < n; ++i) {
    ScoreRow r;
    r.space = i % 2 ? SearchSpace::Sss : SearchSpace::Tss;
    r.dataset = static_cast<Dataset>(i % 3);
    r.spec = to_string(sample_spec(r.space, i));
    r.net_id = "net-" + std::to_string(i);
    for (auto& p : r.proxies) p = g(rng) * std::pow(10.0, static_cast<int>(i % 7) - 3);
    r.params = 1000.0 + static_cast<double>(i);
    r.flops = 2.5e6 * static_cast<double>(i + 1);
    r.accuracy = 60.0 + 10.0 * g(rng);
    t.rows.push_back(r);
  }
  return t;
}

std::string to_csv(const ScoreTable& t) {
  std::ostringstream ss;
  t.write_csv(ss);
  return ss.str();
}

}  // namespace

TEST_CASE("feature and header layout") {
  const auto& f = feature_names();
  REQUIRE(f.size() == kFeatureCount);
  CHECK(f[0] == "cifar10");
  CHECK(f[2] == "imagenet16");
  CHECK(f[3] == "synflow");
  CHECK(f[24] == "params");
  CHECK(f[25] == "flops");
  const auto& h = table_header();
  CHECK(h.size() == kFeatureCount + 4);
  CHECK(h.front() == "net_id");
  CHECK(h.back() == "accuracy");
}

TEST_CASE("score tables round-trip byte for byte") {
  const ScoreTable t = random_table(40, 3);
  const std::string csv = to_csv(t);
  std::istringstream in(csv);
  const ScoreTable back = ScoreTable::read_csv(in);
  REQUIRE(back.rows.size() == t.rows.size());
  CHECK(to_csv(back) == csv);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    CHECK(back.rows[i].proxies == t.rows[i].proxies);
    CHECK(back.rows[i].dataset == t.rows[i].dataset);
    CHECK(back.rows[i].spec == t.rows[i].spec);
  }
}

TEST_CASE("dataset tags are one-hot feature columns") {
  const ScoreTable t = random_table(6, 1);
  for (const auto& r : t.rows) {
    const auto f = r.features();
    CHECK(f[0] + f[1] + f[2] == 1.0);
    CHECK(f[static_cast<std::size_t>(r.dataset)] == 1.0);
    CHECK(r.feature("params") == r.params);
    CHECK(r.feature("gm_j") == r.proxies[20]);
  }
  ScoreRow r;
  CHECK_THROWS_AS(r.feature("nope"), DataError);
  CHECK_THROWS_AS(r.set_proxy("params", 1.0), DataError);
  r.set_proxy("zico", 2.0);
  CHECK(r.feature("zico") == 2.0);
}

TEST_CASE("missing columns are listed") {
  std::istringstream in("net_id,spec,accuracy\nx,y,1\n");
  try {
    ScoreTable::read_csv(in);
    FAIL("expected a data error");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("search_space") != std::string::npos);
    CHECK(msg.find("gm_a") != std::string::npos);
  }
}

TEST_CASE("bad rows name the line") {
  std::string csv = to_csv(random_table(3, 2));
  const auto pos = csv.find(",net-1,") == std::string::npos ? csv.find("\nnet-1,") : csv.find(",net-1,");
  REQUIRE(pos != std::string::npos);
  const auto line_end = csv.find('\n', pos + 1);
  const auto last_comma = csv.rfind(',', line_end);
  csv.replace(last_comma + 1, line_end - last_comma - 1, "abc");
  std::istringstream in(csv);
  try {
    ScoreTable::read_csv(in);
    FAIL("expected a data error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  std::istringstream empty("");
  CHECK_THROWS_AS(ScoreTable::read_csv(empty), DataError);
  CHECK_THROWS_AS(ScoreTable::load("/nonexistent/table.csv"), IoError);
}

TEST_CASE("number formatting") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
  CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("csv quoting") {
  const std::vector<std::string> f = {"a", "b,c", "say \"hi\"", ""};
  CHECK(csv_line(f) == "a,\"b,c\",\"say \"\"hi\"\"\",");
  CHECK(split_csv_line(csv_line(f)) == f);
  CHECK(split_csv_line("x,y\r") == std::vector<std::string>{"x", "y"});
}

TEST_CASE("matrix and columns follow the requested features") {
  const ScoreTable t = random_table(5, 4);
  const auto m = t.matrix({"flops", "cifar100"});
  CHECK(m.rows == 5);
  CHECK(m.cols == 2);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(m(i, 0) == t.rows[i].flops);
    CHECK(m(i, 1) == (t.rows[i].dataset == Dataset::Cifar100 ? 1.0 : 0.0));
  }
  CHECK(t.targets()[3] == t.rows[3].accuracy);
  CHECK_THROWS_AS(t.matrix({"flops", "bogus"}), DataError);
  CHECK_THROWS_AS(check_feature_names({"a", "naswot", "b"}), DataError);
}

TEST_CASE("correlation report per group") {
  const ScoreTable t = random_table(60, 5);
  const auto acc = t.targets();
  std::vector<double> neg(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) neg[i] = -3.0 * acc[i];
  std::vector<std::size_t> rows(t.rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  const auto rep = correlation_report(t, {{"same", acc}, {"neg", neg}}, rows);
  CHECK(rep.size() == 12);
  for (const auto& r : rep) {
    CHECK(r.kendall_abs == doctest::Approx(1.0));
    CHECK(r.spearman_abs == doctest::Approx(1.0));
    CHECK(r.n == 10);
  }
  std::vector<std::string> warnings;
  const auto small = correlation_report(t, {{"same", acc}}, {0, 1, 2, 3, 4, 5, 6}, &warnings);
  CHECK(small.size() == 1);  // only tss/cifar10 has two rows (0 and 6)
  CHECK(warnings.size() == 5);
  CHECK_THROWS_AS(correlation_report(t, {{"short", {1.0}}}, rows), DataError);

  std::ostringstream csv;
  write_report_csv(rep, csv);
  CHECK(csv.str().rfind("proxy_id,search_space,dataset,kendall_abs,spearman_abs,n\n", 0) == 0);
  CHECK(format_report_text(rep).find("neg") != std::string::npos);
}
