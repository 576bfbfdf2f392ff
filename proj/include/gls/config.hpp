#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gls {

/// Flat `key = value` settings. `#` starts a comment; blank lines are ignored.
/// Values are typed on read: integers, reals, booleans (true/false/1/0/yes/no)
/// and comma-separated lists of either.
class KeyValueConfig {
 public:
  /// Throws ParseError naming `source` and the line for malformed or duplicate keys.
  static KeyValueConfig parse(std::istream& in, const std::string& source);
  /// Throws IoError when the file cannot be opened.
  static KeyValueConfig load(const std::string& path);

  /// Later values win; used for command-line overrides.
  void set(const std::string& key, const std::string& value);
  /// Parses "key=value"; throws ParseError.
  void set_assignment(const std::string& assignment);

  bool has(const std::string& key) const { return entries_.count(key) > 0; }
  std::optional<std::string> raw(const std::string& key) const;

  // Typed getters throw ConfigInvalid naming the key (and line when read from a file).
  std::string get_string(const std::string& key, const std::string& fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<long long> get_ints(const std::string& key, const std::vector<long long>& fallback) const;
  std::vector<std::string> get_strings(const std::string& key, const std::vector<std::string>& fallback) const;

  std::vector<std::string> keys() const;
  /// Throws ConfigInvalid for the first key not in `known`.
  void require_known(const std::vector<std::string>& known) const;

 private:
  struct Entry {
    std::string value;
    std::string origin;  // "file:line" or "command line"
  };
  const Entry* find(const std::string& key) const;
  std::map<std::string, Entry> entries_;
};

}  // namespace gls
