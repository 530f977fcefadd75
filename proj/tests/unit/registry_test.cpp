#include <fstream>
#include <sstream>

#include "doctest.h"
#include "gf/error.hpp"
#include "gf/registry.hpp"
#include "support/published_programs.hpp"

using namespace gf;

namespace {

std::size_t parse_offset(std::string_view text) {
  try {
    parse_entries(text);
  } catch (const ParseError& e) {
    return e.offset();
  }
  return 9999;
}

}  // namespace

TEST_CASE("entries continue while parentheses are open") {
  const auto e = parse_entries("# header\na = f(x,\n   y)  # tail\n\nb=c\n");
  REQUIRE(e.size() == 2);
  CHECK(e[0].key == "a");
  CHECK(e[0].value == "f(x,\ny)");
  CHECK(e[0].line == 2);
  CHECK(e[1].key == "b");
  CHECK(e[1].value == "c");
  CHECK(e[1].line == 5);
  CHECK(parse_entries("").empty());
  CHECK(parse_entries("  # only a comment").empty());
}

TEST_CASE("entry errors carry offsets") {
  CHECK(parse_offset("a = 1\n  nokey\n") == 8);
  CHECK(parse_offset("a = 1\nb = f(x,\n  y\n") == 6);
  CHECK(parse_offset(" = 3") == 1);
}

TEST_CASE("config lookups") {
  const Config c = Config::parse("seed = 3\nbins = 5\nseed = 4\n");
  CHECK(c.get("seed") == "4");
  CHECK(c.get_or("bins", "9") == "5");
  CHECK(c.get_or("missing", "9") == "9");
  CHECK(c.contains("bins"));
  CHECK_THROWS_AS(c.get("missing"), ConfigError);
  CHECK_THROWS_AS(Config::load("/nonexistent/gf.cfg"), IoError);
}

TEST_CASE("the compiled-in registry is the shipped data file") {
  const std::string file = read_text_file(std::string(GF_SOURCE_DIR) + "/data/registry.txt");
  CHECK(FormulaRegistry::builtin_text() == file);
}

TEST_CASE("the builtin registry holds the published programs") {
  const FormulaRegistry reg = FormulaRegistry::builtin();
  for (const auto& [id, text] : testing::kPublishedPrograms) {
    INFO(id);
    REQUIRE(reg.contains(std::string(id)));
    CHECK(reg.get(std::string(id)) == parse_formula(text));
  }
  REQUIRE(reg.ids().size() >= 10);
  for (std::size_t i = 0; i < 10; ++i) CHECK(reg.ids()[i] == testing::kPublishedPrograms[i].first);
  CHECK(reg.contains("eznas"));
}

TEST_CASE("set replaces in place and keeps registration order") {
  FormulaRegistry reg = FormulaRegistry::parse("x = abs(pass_grad)\ny = log(pass_wt)\n");
  reg.set("x", "relu(pass_wt)");
  reg.set("z", "numel(pass_grad)");
  CHECK(reg.ids() == std::vector<std::string>{"x", "y", "z"});
  CHECK(reg.source("x") == "relu(pass_wt)");
  CHECK(reg.get("x") == parse_formula("relu(pass_wt)"));
  CHECK_THROWS_AS(reg.get("w"), ConfigError);
  CHECK_THROWS_AS(reg.source("w"), ConfigError);
  CHECK_THROWS_AS(reg.set("bad", "relu(pass_wt"), ParseError);
  CHECK(reg.ids().size() == 3);
}

TEST_CASE("registry parse errors name the formula and line") {
  try {
    FormulaRegistry::parse("ok = abs(pass_grad)\n\nbad = frob(pass_grad)\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("'bad'") != std::string::npos);
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(e.offset() == 0);
  }
}

TEST_CASE("registry load from a file") {
  const std::string path = "gf_registry_test.txt";
  {
    std::ofstream out(path);
    out << "q = sum(pass_grad, pass_wt)\n";
  }
  const FormulaRegistry reg = FormulaRegistry::load(path);
  CHECK(reg.ids() == std::vector<std::string>{"q"});
  std::remove(path.c_str());
  CHECK_THROWS_AS(FormulaRegistry::load("/nonexistent/registry.txt"), IoError);
}
