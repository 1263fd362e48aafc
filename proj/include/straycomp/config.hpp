#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "straycomp/core.hpp"

namespace straycomp {

/// INI-style settings: `[section]` headers, `key = value` lines, `#` or `;`
/// comment lines. Arrays are written inline (comma or whitespace separated) or
/// as `@path` to a text/CSV file resolved against the config's directory.
///
/// Every lookup records the value it resolved to, defaults included, so
/// manifest() reproduces the full effective configuration.
class Config {
 public:
  Config() = default;

  static Config parse(std::string_view text, std::filesystem::path base_dir = ".") {
    Config c;
    c.base_dir_ = std::move(base_dir);
    std::istringstream in{std::string(text)};
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
    }
    for (const auto& [name, node] : tree) {
      if (node.empty()) throw ConfigError("config: key '" + name + "' is outside any [section]");
      for (const auto& [key, value] : node) c.raw_[name][key] = value.get_value<std::string>();
    }
    return c;
  }

  static Config load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path.parent_path().empty() ? "." : path.parent_path());
  }

  bool has(const std::string& section, const std::string& key) const {
    auto s = raw_.find(section);
    return s != raw_.end() && s->second.count(key) > 0;
  }

  /// Sets or replaces a raw value, as if it had been in the file.
  void set(const std::string& section, const std::string& key, std::string value) {
    raw_[section][key] = std::move(value);
  }

  double number(const std::string& section, const std::string& key, double fallback) {
    double v = fallback;
    if (auto raw = lookup(section, key)) v = parse_number(*raw, section, key);
    record(section, key, format_number(v));
    return v;
  }

  long long integer(const std::string& section, const std::string& key, long long fallback) {
    long long v = fallback;
    if (auto raw = lookup(section, key)) {
      const auto* end = raw->data() + raw->size();
      const auto res = std::from_chars(raw->data(), end, v);
      if (res.ec != std::errc{} || res.ptr != end) fail(section, key, "expected an integer, got '" + *raw + "'");
    }
    record(section, key, std::to_string(v));
    return v;
  }

  bool flag(const std::string& section, const std::string& key, bool fallback) {
    bool v = fallback;
    if (auto raw = lookup(section, key)) {
      std::string t = *raw;
      std::transform(t.begin(), t.end(), t.begin(), [](unsigned char ch) { return std::tolower(ch); });
      if (t == "true" || t == "yes" || t == "on" || t == "1") {
        v = true;
      } else if (t == "false" || t == "no" || t == "off" || t == "0") {
        v = false;
      } else {
        fail(section, key, "expected true/false, got '" + *raw + "'");
      }
    }
    record(section, key, v ? "true" : "false");
    return v;
  }

  std::string text(const std::string& section, const std::string& key, const std::string& fallback) {
    std::string v = fallback;
    if (auto raw = lookup(section, key)) v = *raw;
    record(section, key, v);
    return v;
  }

  /// Reads exactly `n` numbers. The manifest records them inline even when
  /// they came from a file.
  std::vector<double> array(const std::string& section, const std::string& key, std::size_t n,
                            const std::vector<double>& fallback) {
    std::vector<double> v = fallback;
    if (auto raw = lookup(section, key)) {
      std::string body = *raw;
      if (!body.empty() && body[0] == '@') body = read_file(section, key, body.substr(1));
      v = split_numbers(body, section, key);
    }
    if (v.size() != n) {
      fail(section, key, "expected " + std::to_string(n) + " values, got " + std::to_string(v.size()));
    }
    std::string canon;
    for (std::size_t i = 0; i < v.size(); ++i) canon += (i ? ", " : "") + format_number(v[i]);
    record(section, key, canon);
    return v;
  }

  /// Records `value` as resolved regardless of any raw entry, which is
  /// consumed and returned.
  std::string note(const std::string& section, const std::string& key, std::string value) {
    const std::string* raw = lookup(section, key);
    std::string previous = raw ? *raw : value;
    record(section, key, std::move(value));
    return previous;
  }

  /// "section.key" for raw entries that no lookup has consumed.
  std::vector<std::string> unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [section, keys] : raw_) {
      for (const auto& [key, value] : keys) {
        if (!consumed_.count(section + "." + key)) out.push_back(section + "." + key);
      }
    }
    return out;
  }

  void reject_unused() const {
    const auto extra = unused_keys();
    if (extra.empty()) return;
    std::string msg = "unknown config key";
    msg += extra.size() > 1 ? "s: " : ": ";
    for (std::size_t i = 0; i < extra.size(); ++i) msg += (i ? ", " : "") + extra[i];
    throw ConfigError(msg);
  }

  /// Resolved values as INI text, sections and keys in lexicographic order.
  std::string manifest() const {
    std::string out;
    for (const auto& [section, keys] : resolved_) {
      if (!out.empty()) out += "\n";
      out += "[" + section + "]\n";
      for (const auto& [key, value] : keys) out += key + " = " + value + "\n";
    }
    return out;
  }

  const std::map<std::string, std::map<std::string, std::string>>& resolved() const { return resolved_; }

 private:
  const std::string* lookup(const std::string& section, const std::string& key) {
    consumed_.insert(section + "." + key);
    auto s = raw_.find(section);
    if (s == raw_.end()) return nullptr;
    auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
  }

  void record(const std::string& section, const std::string& key, std::string value) {
    resolved_[section][key] = std::move(value);
  }

  [[noreturn]] static void fail(const std::string& section, const std::string& key, const std::string& what) {
    throw ConfigError(section + "." + key + ": " + what);
  }

  static double parse_number(std::string_view s, const std::string& section, const std::string& key) {
    double v = 0;
    const auto* end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, v);
    if (res.ec != std::errc{} || res.ptr != end) fail(section, key, "expected a number, got '" + std::string(s) + "'");
    return v;
  }

  static std::vector<double> split_numbers(const std::string& body, const std::string& section,
                                           const std::string& key) {
    std::vector<double> out;
    std::istringstream lines(body);
    std::string line;
    while (std::getline(lines, line)) {
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      std::replace(line.begin(), line.end(), ',', ' ');
      std::istringstream words(line);
      std::string w;
      while (words >> w) out.push_back(parse_number(w, section, key));
    }
    return out;
  }

  std::string read_file(const std::string& section, const std::string& key, const std::string& name) const {
    const std::filesystem::path p = std::filesystem::path(name).is_absolute() ? std::filesystem::path(name) : base_dir_ / name;
    std::ifstream in(p);
    if (!in) fail(section, key, "cannot open " + p.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
  }

  std::filesystem::path base_dir_ = ".";
  std::map<std::string, std::map<std::string, std::string>> raw_;
  std::map<std::string, std::map<std::string, std::string>> resolved_;
  std::set<std::string> consumed_;
};

}  // namespace straycomp
