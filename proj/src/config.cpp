#include "lampdet/config.hpp"

#include "lampdet/error.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace lampdet {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// Drops a trailing comment that is not inside a string.
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

[[noreturn]] void fail(int line, const std::string& what) {
  throw Error(ErrorCode::ValidationError, "config line " + std::to_string(line) + ": " + what);
}

std::string parse_string(const std::string& tok, int line) {
  if (tok.size() < 2 || tok.front() != '"' || tok.back() != '"') fail(line, "bad string " + tok);
  std::string out;
  for (std::size_t i = 1; i + 1 < tok.size(); ++i) {
    if (tok[i] == '\\' && i + 2 < tok.size()) {
      const char c = tok[++i];
      out.push_back(c == 'n' ? '\n' : c == 't' ? '\t' : c);
    } else {
      out.push_back(tok[i]);
    }
  }
  return out;
}

bool parse_number(const std::string& tok, double& out) {
  std::string t;
  for (char c : tok) {
    if (c != '_') t.push_back(c);
  }
  if (t == "inf" || t == "+inf") {
    out = HUGE_VAL;
    return true;
  }
  if (t == "-inf") {
    out = -HUGE_VAL;
    return true;
  }
  const char* b = t.data();
  const char* e = t.data() + t.size();
  if (b != e && *b == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && ptr == e;
}

std::vector<std::string> split_array(const std::string& body) {
  std::vector<std::string> items;
  std::string cur;
  bool quoted = false;
  for (char c : body) {
    if (c == '"') quoted = !quoted;
    if (c == ',' && !quoted) {
      items.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!trim(cur).empty()) items.push_back(trim(cur));
  return items;
}

Config::Value parse_value(const std::string& tok, int line) {
  if (tok.empty()) fail(line, "missing value");
  if (tok == "true") return true;
  if (tok == "false") return false;
  if (tok.front() == '"') return parse_string(tok, line);
  if (tok.front() == '[') {
    if (tok.back() != ']') fail(line, "arrays must close on the same line");
    const auto items = split_array(tok.substr(1, tok.size() - 2));
    if (!items.empty() && items.front().front() == '"') {
      std::vector<std::string> out;
      for (const auto& it : items) out.push_back(parse_string(it, line));
      return out;
    }
    std::vector<double> out;
    for (const auto& it : items) {
      double v = 0.0;
      if (!parse_number(it, v)) fail(line, "bad number " + it);
      out.push_back(v);
    }
    return out;
  }
  double v = 0.0;
  if (!parse_number(tok, v)) fail(line, "cannot parse value " + tok);
  return v;
}

}  // namespace

Config Config::parse(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string raw, section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') fail(line, "unterminated section header");
      section = trim(s.substr(1, s.size() - 2));
      if (section.empty()) fail(line, "empty section name");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail(line, "expected key = value");
    const std::string key = trim(s.substr(0, eq));
    if (key.empty()) fail(line, "empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (cfg.has(full)) fail(line, "duplicate key " + full);
    cfg.values_[full] = parse_value(trim(s.substr(eq + 1)), line);
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

double Config::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (const double* d = std::get_if<double>(&it->second)) return *d;
  throw Error(ErrorCode::ValidationError, key + " must be a number");
}

int Config::get_int(const std::string& key, int fallback) const {
  const double d = get_double(key, fallback);
  if (d != std::floor(d)) throw Error(ErrorCode::ValidationError, key + " must be an integer");
  return static_cast<int>(d);
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (const bool* b = std::get_if<bool>(&it->second)) return *b;
  throw Error(ErrorCode::ValidationError, key + " must be true or false");
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (const std::string* s = std::get_if<std::string>(&it->second)) return *s;
  throw Error(ErrorCode::ValidationError, key + " must be a string");
}

std::vector<double> Config::get_doubles(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return {};
  if (const auto* v = std::get_if<std::vector<double>>(&it->second)) return *v;
  throw Error(ErrorCode::ValidationError, key + " must be an array of numbers");
}

}  // namespace lampdet
