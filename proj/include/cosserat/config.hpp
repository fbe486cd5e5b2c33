#pragma once

// Flat run configuration: dotted key paths mapped to scalar or array values.
// Files are JSON documents whose nested objects are flattened
// ({"grid": {"n": 17}} becomes grid.n); overrides are KEY=VALUE strings whose
// value is read as JSON when it parses and as a plain string otherwise.

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cosserat/error.hpp"

namespace cosserat {

class Config {
 public:
  using Json = nlohmann::json;

  Config() = default;
  explicit Config(std::map<std::string, Json> defaults) : values_(std::move(defaults)) {}

  /// Flattens nested objects of `doc` into dotted keys.
  static std::map<std::string, Json> flatten(const Json& doc) {
    std::map<std::string, Json> out;
    if (!doc.is_object()) throw ConfigError("config: top level must be an object");
    flatten_into(doc, "", out);
    return out;
  }

  /// Applies every entry of `entries`; keys outside `known` are rejected and
  /// keys outside this config (but known) are ignored.
  void merge(const std::map<std::string, Json>& entries, const std::set<std::string>& known) {
    for (const auto& [key, value] : entries) {
      if (!known.count(key)) throw ConfigError("config: unknown key '" + key + "'");
      if (values_.count(key)) values_[key] = value;
    }
  }

  void merge_file(const std::string& path, const std::set<std::string>& known) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    Json doc;
    try {
      in >> doc;
    } catch (const Json::exception& e) {
      throw ConfigError("config: cannot parse '" + path + "': " + e.what());
    }
    merge(flatten(doc), known);
  }

  /// Parses KEY=VALUE.
  static std::pair<std::string, Json> parse_assignment(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + text + "' is not KEY=VALUE");
    const std::string key = text.substr(0, eq);
    const std::string raw = text.substr(eq + 1);
    Json value = Json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    return {key, value};
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  const Json& at(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("config: missing key '" + key + "'");
    return it->second;
  }

  double number(const std::string& key) const {
    const Json& v = at(key);
    if (!v.is_number()) throw ConfigError("config: '" + key + "' must be a number");
    return v.get<double>();
  }

  int integer(const std::string& key) const {
    const Json& v = at(key);
    if (!v.is_number()) throw ConfigError("config: '" + key + "' must be an integer");
    const double d = v.get<double>();
    if (d != std::floor(d) || std::abs(d) > 2e9) throw ConfigError("config: '" + key + "' must be an integer");
    return static_cast<int>(d);
  }

  std::string string(const std::string& key) const {
    const Json& v = at(key);
    if (!v.is_string()) throw ConfigError("config: '" + key + "' must be a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const std::string& key) const {
    const Json& v = at(key);
    if (v.is_number()) return {v.get<double>()};
    if (!v.is_array()) throw ConfigError("config: '" + key + "' must be a list of numbers");
    std::vector<double> out;
    for (const Json& e : v) {
      if (!e.is_number()) throw ConfigError("config: '" + key + "' must be a list of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::vector<int> integers(const std::string& key) const {
    std::vector<int> out;
    for (double d : numbers(key)) {
      if (d != std::floor(d)) throw ConfigError("config: '" + key + "' must be a list of integers");
      out.push_back(static_cast<int>(d));
    }
    return out;
  }

  const std::map<std::string, Json>& values() const { return values_; }

  Json to_json() const {
    Json out = Json::object();
    for (const auto& [k, v] : values_) out[k] = v;
    return out;
  }

 private:
  static void flatten_into(const Json& node, const std::string& prefix, std::map<std::string, Json>& out) {
    for (const auto& [k, v] : node.items()) {
      const std::string key = prefix.empty() ? k : prefix + "." + k;
      if (v.is_object()) {
        flatten_into(v, key, out);
      } else {
        out[key] = v;
      }
    }
  }

  std::map<std::string, Json> values_;
};

}  // namespace cosserat
