#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace lampdet {

/// Flat view of a small TOML subset: [section] headers, key = value lines, '#' comments.
/// Values are strings, numbers, booleans or one-line arrays of those. Keys are stored
/// as "section.key".
class Config {
 public:
  using Value = std::variant<bool, double, std::string, std::vector<double>, std::vector<std::string>>;

  static Config parse(const std::string& text);
  static Config load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, Value v) { values_[key] = std::move(v); }

  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::vector<double> get_doubles(const std::string& key) const;

  const std::map<std::string, Value>& values() const { return values_; }

 private:
  std::map<std::string, Value> values_;
};

}  // namespace lampdet
