#include "gls/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>

#include "gls/error.hpp"

namespace gls {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.size() == 1 && out[0].empty()) out.clear();
  return out;
}

bool valid_key(const std::string& key) {
  return !key.empty() && std::all_of(key.begin(), key.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '-' || c == '.';
  });
}

template <class T>
bool parse_number(const std::string& s, T& out) {
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return !s.empty() && res.ec == std::errc() && res.ptr == s.data() + s.size();
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::istream& in, const std::string& source) {
  KeyValueConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto where = source + ":" + std::to_string(line_no);
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw Error(Errc::ParseError, where + ": expected 'key = value'");
    const std::string key = trim(body.substr(0, eq));
    if (!valid_key(key)) throw Error(Errc::ParseError, where + ": invalid key '" + key + "'");
    if (cfg.entries_.count(key)) throw Error(Errc::ParseError, where + ": duplicate key '" + key + "'");
    cfg.entries_[key] = {trim(body.substr(eq + 1)), where};
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open config file " + path);
  return parse(in, path);
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  entries_[key] = {value, "command line"};
}

void KeyValueConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  const std::string key = eq == std::string::npos ? "" : trim(assignment.substr(0, eq));
  if (!valid_key(key)) throw Error(Errc::ParseError, "command line: expected key=value, got '" + assignment + "'");
  set(key, trim(assignment.substr(eq + 1)));
}

const KeyValueConfig::Entry* KeyValueConfig::find(const std::string& key) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

std::optional<std::string> KeyValueConfig::raw(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) return std::nullopt;
  return e->value;
}

namespace {
[[noreturn]] void bad_value(const std::string& key, const std::string& origin, const std::string& value,
                            const char* type) {
  throw Error(Errc::ConfigInvalid, origin + ": " + key + " = '" + value + "' is not " + type);
}
}  // namespace

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  const Entry* e = find(key);
  return e ? e->value : fallback;
}

long long KeyValueConfig::get_int(const std::string& key, long long fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  long long v = 0;
  if (!parse_number(e->value, v)) bad_value(key, e->origin, e->value, "an integer");
  return v;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  double v = 0.0;
  if (!parse_number(e->value, v)) bad_value(key, e->origin, e->value, "a number");
  return v;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  std::string v = e->value;
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, e->origin, e->value, "a boolean");
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  std::vector<double> out;
  for (const auto& item : split_list(e->value)) {
    double v = 0.0;
    if (!parse_number(item, v)) bad_value(key, e->origin, e->value, "a list of numbers");
    out.push_back(v);
  }
  return out;
}

std::vector<long long> KeyValueConfig::get_ints(const std::string& key, const std::vector<long long>& fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  std::vector<long long> out;
  for (const auto& item : split_list(e->value)) {
    long long v = 0;
    if (!parse_number(item, v)) bad_value(key, e->origin, e->value, "a list of integers");
    out.push_back(v);
  }
  return out;
}

std::vector<std::string> KeyValueConfig::get_strings(const std::string& key,
                                                     const std::vector<std::string>& fallback) const {
  const Entry* e = find(key);
  return e ? split_list(e->value) : fallback;
}

std::vector<std::string> KeyValueConfig::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : entries_) out.push_back(k);
  return out;
}

void KeyValueConfig::require_known(const std::vector<std::string>& known) const {
  for (const auto& [k, e] : entries_) {
    if (std::find(known.begin(), known.end(), k) == known.end()) {
      throw Error(Errc::ConfigInvalid, e.origin + ": unknown key '" + k + "'");
    }
  }
}

}  // namespace gls
