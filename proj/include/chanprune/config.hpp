// Copyright 2026 The chanprune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CHANPRUNE_CONFIG_HPP_
#define CHANPRUNE_CONFIG_HPP_

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace chanprune {

/// Nested key-value text configuration.
///
///     # comment
///     seed = 7
///     [admm]
///     prune_rate = 0.5
///
/// A `[section]` header prefixes the keys that follow it, so the example
/// defines `seed` and `admm.prune_rate`. Values are raw strings; typed
/// accessors parse on demand. Only keys present in the schema (the default
/// config) are accepted.
class Config {
 public:
  /// All known keys with their defaults. `seed` has no default.
  static Config defaults();

  /// Parses text on top of the defaults. Throws ConfigError listing every
  /// unknown key or malformed line.
  static Config parse(const std::string& text, const std::string& origin = "<string>");
  static Config load(const std::filesystem::path& path);

  /// Sets a dotted key. Throws ConfigError for keys outside the schema.
  void set(const std::string& key, const std::string& value);
  /// Applies a "dotted.key=value" override.
  void apply_override(const std::string& assignment);

  bool has(const std::string& key) const;
  /// Keys set by a file or override rather than inherited from defaults.
  bool explicitly_set(const std::string& key) const { return explicit_.count(key) > 0; }

  const std::string& get(const std::string& key) const;  // ConfigError if unset
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  long long get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key) const;  // comma separated
  std::vector<std::string> get_strings(const std::string& key) const;

  /// Canonical text: top-level keys first, then one section per prefix,
  /// keys sorted. Parsing the output reproduces the config.
  std::string to_text() const;

  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> schema_;
  std::set<std::string> explicit_;
};

/// Finds a preset by bare name (e.g. "toy_ci") in the shipped configs
/// directory, or returns `name_or_path` unchanged when it is an existing file.
std::filesystem::path resolve_config_path(const std::string& name_or_path);

}  // namespace chanprune

#endif  // CHANPRUNE_CONFIG_HPP_
