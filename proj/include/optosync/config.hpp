#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace optosync {

/// Flat `key = value` configuration with `#` comments.
///
/// Getters mark a key as consumed; `ensure_known` rejects keys outside the
/// documented set so typos surface as errors instead of silently using
/// defaults.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::istream& in, const std::string& source = "<input>");
  static KeyValueConfig parse_string(const std::string& text);
  static KeyValueConfig load(const std::string& path);

  /// Inserts or overwrites a value (used by command-line overrides).
  void set(const std::string& key, const std::string& value);
  /// Parses a `key=value` override.
  void set_assignment(const std::string& assignment);

  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> raw(const std::string& key) const;

  double get_double(const std::string& key, double fallback);
  std::int64_t get_int(const std::string& key, std::int64_t fallback);
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback);
  bool get_bool(const std::string& key, bool fallback);
  std::string get_string(const std::string& key, const std::string& fallback);
  std::optional<double> get_optional_double(const std::string& key);
  /// Either `a,b,c` or an inclusive range `start:step:stop`.
  std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback);

  /// Throws ConfigError naming every key not in `known`.
  void ensure_known(const std::set<std::string>& known) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> consumed_;
};

double parse_double(const std::string& text, const std::string& key);

}  // namespace optosync
