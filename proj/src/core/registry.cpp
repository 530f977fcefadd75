#include "gf/registry.hpp"

#include <fstream>
#include <sstream>

#include "builtin_registry.inc"
#include "gf/error.hpp"

namespace gf {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Strips a trailing comment; '#' never occurs inside formulas.
std::string_view strip_comment(std::string_view line) {
  const auto h = line.find('#');
  return h == std::string_view::npos ? line : line.substr(0, h);
}

long paren_balance(std::string_view s) {
  long b = 0;
  for (char c : s) b += (c == '(') - (c == ')');
  return b;
}

}  // namespace

std::vector<ConfigEntry> parse_entries(std::string_view text) {
  std::vector<ConfigEntry> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  long open = 0;        // balance of the entry being continued
  std::size_t open_at = 0;  // offset of that entry's key
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::size_t end = nl == std::string_view::npos ? text.size() : nl;
    const std::string_view raw = text.substr(pos, end - pos);
    ++line_no;
    const std::string_view body = trim(strip_comment(raw));
    if (open > 0) {
      if (!body.empty()) {
        out.back().value += '\n';
        out.back().value += body;
        open += paren_balance(body);
      }
    } else if (!body.empty()) {
      const auto eq = body.find('=');
      const std::size_t line_start = pos + static_cast<std::size_t>(body.data() - raw.data());
      if (eq == std::string_view::npos) throw ParseError("expected 'key = value' on line " + std::to_string(line_no), line_start);
      ConfigEntry e;
      e.key = std::string(trim(body.substr(0, eq)));
      e.value = std::string(trim(body.substr(eq + 1)));
      e.line = line_no;
      if (e.key.empty()) throw ParseError("empty key on line " + std::to_string(line_no), line_start);
      open = paren_balance(e.value);
      open_at = line_start;
      out.push_back(std::move(e));
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  if (open > 0) throw ParseError("unbalanced parentheses in entry '" + out.back().key + "'", open_at);
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Config Config::parse(std::string_view text) {
  Config c;
  for (auto& e : parse_entries(text)) c.values_[e.key] = e.value;
  return c;
}

Config Config::load(const std::string& path) { return parse(read_text_file(path)); }

const std::string& Config::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing configuration key '" + key + "'");
  return it->second;
}

std::string Config::get_or(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string_view FormulaRegistry::builtin_text() { return kBuiltinRegistry; }

FormulaRegistry FormulaRegistry::builtin() { return parse(builtin_text()); }

FormulaRegistry FormulaRegistry::parse(std::string_view text) {
  FormulaRegistry r;
  for (auto& e : parse_entries(text)) {
    try {
      r.set(e.key, e.value);
    } catch (const ParseError& err) {
      throw ParseError("formula '" + e.key + "' (line " + std::to_string(e.line) + "): " + err.what(), err.offset());
    }
  }
  return r;
}

FormulaRegistry FormulaRegistry::load(const std::string& path) { return parse(read_text_file(path)); }

void FormulaRegistry::set(const std::string& id, const std::string& text) {
  FormulaExpr e = parse_formula(text);
  if (!exprs_.count(id)) ids_.push_back(id);
  exprs_[id] = std::move(e);
  sources_[id] = text;
}

bool FormulaRegistry::contains(const std::string& id) const { return exprs_.count(id) != 0; }

const FormulaExpr& FormulaRegistry::get(const std::string& id) const {
  const auto it = exprs_.find(id);
  if (it == exprs_.end()) throw ConfigError("formula '" + id + "' is not registered");
  return it->second;
}

const std::string& FormulaRegistry::source(const std::string& id) const {
  const auto it = sources_.find(id);
  if (it == sources_.end()) throw ConfigError("formula '" + id + "' is not registered");
  return it->second;
}

}  // namespace gf
