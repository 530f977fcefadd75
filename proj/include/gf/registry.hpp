#pragma once

// Line-oriented `key = value` files, used both for the formula registry and
// for pipeline configuration. `#` starts a comment; an entry whose value has
// unbalanced parentheses continues onto the following lines.

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gf/formula.hpp"

namespace gf {

struct ConfigEntry {
  std::string key;
  std::string value;  // continuation lines joined with '\n'
  std::size_t line = 0;  // 1-based line of the key
};

// Throws ParseError (offset into `text`) on a line without '=' or on an entry
// still unbalanced at end of input.
std::vector<ConfigEntry> parse_entries(std::string_view text);

std::string read_text_file(const std::string& path);  // IoError when unreadable

// Flat key/value configuration; later keys override earlier ones.
class Config {
 public:
  static Config parse(std::string_view text);
  static Config load(const std::string& path);

  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& get(const std::string& key) const;  // ConfigError if absent
  std::string get_or(const std::string& key, const std::string& fallback) const;
  const std::map<std::string, std::string>& values() const { return values_; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

 private:
  std::map<std::string, std::string> values_;
};

class FormulaRegistry {
 public:
  // Entries shipped in data/registry.txt (compiled in).
  static FormulaRegistry builtin();
  static std::string_view builtin_text();
  static FormulaRegistry parse(std::string_view text);
  static FormulaRegistry load(const std::string& path);

  // Parses `text`; replaces an existing entry of the same id in place.
  void set(const std::string& id, const std::string& text);
  bool contains(const std::string& id) const;
  const FormulaExpr& get(const std::string& id) const;  // ConfigError if absent
  const std::string& source(const std::string& id) const;
  // Registration order.
  const std::vector<std::string>& ids() const { return ids_; }

 private:
  std::vector<std::string> ids_;
  std::map<std::string, FormulaExpr> exprs_;
  std::map<std::string, std::string> sources_;
};

}  // namespace gf
