// Copyright 2026 The chanprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "chanprune/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "chanprune/errors.hpp"

#ifndef CHANPRUNE_CONFIG_DIR
#define CHANPRUNE_CONFIG_DIR "configs"
#endif

namespace chanprune {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

const std::map<std::string, std::string>& schema_defaults() {
  static const std::map<std::string, std::string> d = {
      {"seed", ""},
      {"run_id", ""},
      {"model.architecture", "toy"},
      {"model.filters", ""},
      {"data.dataset", "synthetic"},
      {"data.subset", "1.0"},
      {"data.root", ""},
      {"data.batch_size", "64"},
      {"data.n_per_class", "256"},
      {"data.test_n_per_class", "256"},
      {"data.difficulty", "0.5"},
      {"data.image_size", "16"},
      {"train.learning_rate", "1e-4"},
      {"train.weight_decay", "5e-4"},
      {"train.pretrain_epochs", "10"},
      {"train.finetune_epochs", "100"},
      {"train.log_interval", "10"},
      {"train.eval_batch_size", "256"},
      {"train.pretrained_checkpoint", ""},
      {"admm.prune_rate", "0.5"},
      {"admm.prune_rates", ""},
      {"admm.rho", "1e-2"},
      {"admm.epsilon_scale", "1e-3"},
      {"admm.epsilon", ""},
      {"admm.norm", "l1"},
      {"admm.granularity", "filter"},
      {"admm.update_interval", "0"},
      {"admm.exit_rule", "both"},
      {"admm.max_epochs", "60"},
      {"admm.patience", "5"},
      {"admm.start", "pretrained"},
      {"prune.criterion", "admm"},
      {"prune.stat_batches", "10"},
      {"prune.stat_batch_size", "50"},
      {"pipeline.kind", "single_shot"},
      {"iterative.filters_per_round", "10"},
      {"iterative.updates_per_round", "500"},
      {"iterative.batch_size", "50"},
      {"iterative.extra_ft", "false"},
      {"iterative.extra_ft_epochs", "100"},
  };
  return d;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string item; std::getline(in, item, ',');) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

Config Config::defaults() {
  Config c;
  for (const auto& [k, v] : schema_defaults()) {
    c.schema_.insert(k);
    if (!v.empty()) c.values_[k] = v;
  }
  return c;
}

Config Config::parse(const std::string& text, const std::string& origin) {
  Config c = defaults();
  std::vector<std::string> problems;
  std::istringstream in(text);
  std::string line, section;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') {
        problems.push_back(where + ": malformed section header");
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      problems.push_back(where + ": expected key = value");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string full = section.empty() ? key : section + "." + key;
    if (!c.schema_.count(full)) {
      problems.push_back(where + ": unknown key '" + full + "'");
      continue;
    }
    c.values_[full] = trim(line.substr(eq + 1));
    c.explicit_.insert(full);
  }
  if (!problems.empty()) {
    std::string msg = "invalid config:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void Config::set(const std::string& key, const std::string& value) {
  if (!schema_.count(key)) throw ConfigError("unknown config key '" + key + "'");
  values_[key] = value;
  explicit_.insert(key);
}

void Config::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

bool Config::has(const std::string& key) const {
  auto it = values_.find(key);
  return it != values_.end() && !it->second.empty();
}

const std::string& Config::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end() || it->second.empty()) {
    throw ConfigError("config key '" + key + "' is not set");
  }
  return it->second;
}

std::string Config::get_or(const std::string& key, const std::string& fallback) const {
  return has(key) ? get(key) : fallback;
}

double Config::get_double(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::logic_error&) {
  }
  throw ConfigError("config key '" + key + "' expects a number, got '" + v + "'");
}

long long Config::get_int(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used == v.size()) return i;
  } catch (const std::logic_error&) {
  }
  throw ConfigError("config key '" + key + "' expects an integer, got '" + v + "'");
}

bool Config::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "' expects true/false, got '" + v + "'");
}

std::vector<double> Config::get_doubles(const std::string& key) const {
  std::vector<double> out;
  if (!has(key)) return out;
  for (const auto& item : split_list(get(key))) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ConfigError("config key '" + key + "' expects a list of numbers, got '" +
                        get(key) + "'");
    }
  }
  return out;
}

std::vector<std::string> Config::get_strings(const std::string& key) const {
  return has(key) ? split_list(get(key)) : std::vector<std::string>{};
}

std::string Config::to_text() const {
  std::ostringstream out;
  std::map<std::string, std::map<std::string, std::string>> sections;
  for (const auto& [k, v] : values_) {
    const auto dot = k.find('.');
    if (dot == std::string::npos) {
      out << k << " = " << v << '\n';
    } else {
      sections[k.substr(0, dot)][k.substr(dot + 1)] = v;
    }
  }
  for (const auto& [name, kv] : sections) {
    out << "\n[" << name << "]\n";
    for (const auto& [k, v] : kv) out << k << " = " << v << '\n';
  }
  return out.str();
}

std::filesystem::path resolve_config_path(const std::string& name_or_path) {
  namespace fs = std::filesystem;
  if (fs::exists(name_or_path)) return name_or_path;
  std::vector<fs::path> dirs;
  if (const char* env = std::getenv("CHANPRUNE_CONFIGS"); env && *env) dirs.emplace_back(env);
  dirs.emplace_back("configs");
  dirs.emplace_back(CHANPRUNE_CONFIG_DIR);
  for (const auto& d : dirs) {
    for (const std::string suffix : {"", ".cfg"}) {
      const fs::path p = d / (name_or_path + suffix);
      if (fs::exists(p)) return p;
    }
  }
  throw IoError("config '" + name_or_path + "' not found as a file or preset name");
}

}  // namespace chanprune
