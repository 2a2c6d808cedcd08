#include "wsvc/toml_lite.hpp"

#include <cctype>
#include <cstdlib>

namespace wsvc {

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

TomlValue parse_scalar(const std::string& tok, int line_no) {
  TomlValue v;
  if (tok.size() >= 2 && tok.front() == '"' && tok.back() == '"') {
    v.kind = TomlValue::Kind::string;
    v.str = tok.substr(1, tok.size() - 2);
    return v;
  }
  if (tok == "true" || tok == "false") {
    v.kind = TomlValue::Kind::boolean;
    v.boolean = tok == "true";
    return v;
  }
  char* end = nullptr;
  const double d = std::strtod(tok.c_str(), &end);
  if (end && *end == '\0' && end != tok.c_str()) {
    v.kind = TomlValue::Kind::number;
    v.num = d;
    return v;
  }
  throw ConfigError("toml: line " + std::to_string(line_no) +
                    ": cannot parse value '" + tok + "'");
}

// Splits a flat [a, b, c] body on commas outside quotes.
std::vector<std::string> split_array_body(const std::string& body,
                                          int line_no) {
  std::vector<std::string> parts;
  std::string cur;
  bool in_str = false;
  for (char c : body) {
    if (c == '"') in_str = !in_str;
    if (c == ',' && !in_str) {
      parts.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (in_str)
    throw ConfigError("toml: line " + std::to_string(line_no) +
                      ": unterminated string");
  const std::string last = trim(cur);
  if (!last.empty()) parts.push_back(last);
  return parts;
}

std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_str = !in_str;
    if (line[i] == '#' && !in_str) return line.substr(0, i);
  }
  return line;
}

}  // namespace

TomlDoc parse_toml(const std::string& text) {
  TomlDoc doc;
  std::string table;
  doc.tables[table];
  size_t pos = 0;
  int line_no = 0;
  while (pos <= text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    const std::string line = trim(strip_comment(text.substr(pos, eol - pos)));
    pos = eol + 1;
    ++line_no;
    if (line.empty()) {
      if (pos > text.size()) break;
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("toml: line " + std::to_string(line_no) +
                          ": malformed table header");
      table = trim(line.substr(1, line.size() - 2));
      doc.tables[table];
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("toml: line " + std::to_string(line_no) +
                        ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty() || val.empty())
      throw ConfigError("toml: line " + std::to_string(line_no) +
                        ": empty key or value");
    TomlValue v;
    if (val.front() == '[') {
      if (val.back() != ']')
        throw ConfigError("toml: line " + std::to_string(line_no) +
                          ": arrays must close on the same line");
      v.kind = TomlValue::Kind::array;
      for (const std::string& tok :
           split_array_body(val.substr(1, val.size() - 2), line_no))
        v.array.push_back(parse_scalar(tok, line_no));
    } else {
      v = parse_scalar(val, line_no);
    }
    doc.tables[table][key] = std::move(v);
  }
  return doc;
}

}  // namespace wsvc
