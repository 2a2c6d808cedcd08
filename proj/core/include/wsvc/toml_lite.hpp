#pragma once

#include <map>
#include <string>
#include <vector>

#include "wsvc/errors.hpp"

namespace wsvc {

// Minimal TOML subset used for sweep grids: [table] headers, key = value
// with strings, numbers, booleans and flat arrays, plus # comments. No
// nesting, no multi-line values.
struct TomlValue {
  enum class Kind { string, number, boolean, array };
  Kind kind = Kind::string;
  std::string str;
  double num = 0;
  bool boolean = false;
  std::vector<TomlValue> array;

  double as_number() const {
    if (kind != Kind::number) throw ConfigError("toml: expected a number");
    return num;
  }
  const std::string& as_string() const {
    if (kind != Kind::string) throw ConfigError("toml: expected a string");
    return str;
  }
};

struct TomlDoc {
  // Root table keys live under "".
  std::map<std::string, std::map<std::string, TomlValue>> tables;

  const TomlValue* find(const std::string& table,
                        const std::string& key) const {
    auto t = tables.find(table);
    if (t == tables.end()) return nullptr;
    auto v = t->second.find(key);
    return v == t->second.end() ? nullptr : &v->second;
  }
};

TomlDoc parse_toml(const std::string& text);

}  // namespace wsvc
