// Copyright 2026 The chanprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "chanprune/record.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "chanprune/errors.hpp"

namespace chanprune {

std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void RunRecord::add(const std::string& stage, std::size_t step, const std::string& layer,
                    const std::string& metric, double value) {
  if (!std::isfinite(value)) {
    throw UsageError("non-finite value for " + metric + " in stage " + stage);
  }
  if (metric.find("accuracy") != std::string::npos && (value < 0.0 || value > 1.0)) {
    throw UsageError("accuracy " + format_value(value) + " outside [0, 1]");
  }
  if (stage.find(',') != std::string::npos || layer.find(',') != std::string::npos ||
      metric.find(',') != std::string::npos) {
    throw UsageError("record fields may not contain commas");
  }
  const auto key = std::make_tuple(stage, metric, layer);
  if (auto it = last_step_.find(key); it != last_step_.end() && step <= it->second) {
    throw UsageError("step " + std::to_string(step) + " for " + metric + " in stage " + stage +
                     " does not increase");
  }
  last_step_[key] = step;
  rows_.push_back({stage, step, layer, metric, value});
}

std::vector<std::pair<std::size_t, double>> RunRecord::series(const std::string& stage,
                                                              const std::string& metric,
                                                              const std::string& layer) const {
  std::vector<std::pair<std::size_t, double>> out;
  for (const auto& r : rows_) {
    if (r.stage == stage && r.metric == metric && r.layer == layer) out.emplace_back(r.step, r.value);
  }
  return out;
}

std::optional<double> RunRecord::last(const std::string& stage, const std::string& metric,
                                      const std::string& layer) const {
  for (auto it = rows_.rbegin(); it != rows_.rend(); ++it) {
    if (it->stage == stage && it->metric == metric && it->layer == layer) return it->value;
  }
  return std::nullopt;
}

std::vector<std::string> RunRecord::metric_names() const {
  std::set<std::string> names;
  for (const auto& r : rows_) names.insert(r.metric);
  return {names.begin(), names.end()};
}

namespace {

void append_row(std::string& out, const MetricRow& r) {
  out += r.stage;
  out += ',';
  out += std::to_string(r.step);
  out += ',';
  out += r.layer;
  out += ',';
  out += r.metric;
  out += ',';
  out += format_value(r.value);
  out += '\n';
}

constexpr const char* kHeader = "stage,step,layer,metric,value\n";

}  // namespace

std::string RunRecord::to_csv() const {
  std::string out = kHeader;
  for (const auto& r : rows_) append_row(out, r);
  return out;
}

std::string RunRecord::to_csv(const std::string& metric) const {
  std::string out = kHeader;
  for (const auto& r : rows_) {
    if (r.metric == metric) append_row(out, r);
  }
  return out;
}

RunRecord RunRecord::from_csv(const std::string& text) {
  RunRecord rec;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line + "\n" != kHeader) {
    throw IntegrityError("record CSV has an unexpected header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 5) throw IntegrityError("malformed record row: " + line);
    try {
      rec.add(f[0], std::stoull(f[1]), f[2], f[3], std::stod(f[4]));
    } catch (const std::logic_error&) {
      throw IntegrityError("malformed record row: " + line);
    } catch (const UsageError& e) {
      throw IntegrityError(std::string("invalid record row: ") + e.what());
    }
  }
  return rec;
}

nlohmann::json RunRecord::summary() const {
  nlohmann::json j;
  j["run_id"] = run_id;
  j["status"] = complete ? "complete" : "incomplete";
  j["criterion"] = criterion_label;
  j["prune_ratio"] = prune_ratio;
  j["final_accuracy"] = final_accuracy ? nlohmann::json(*final_accuracy) : nlohmann::json();
  j["stage_seconds"] = stage_seconds;
  j["warnings"] = warnings;
  j["details"] = details;
  return j;
}

void RunRecord::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "record.csv", std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / "record.csv").string());
    out << to_csv();
  }
  std::ofstream out(dir / "summary.json", std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "summary.json").string());
  out << summary().dump(2) << '\n';
}

RunRecord RunRecord::read(const std::filesystem::path& dir) {
  auto slurp = [&](const std::string& name) {
    std::ifstream in(dir / name, std::ios::binary);
    if (!in) throw IoError("run directory " + dir.string() + " has no " + name);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::string summary_text = slurp("summary.json");
  nlohmann::json s;
  try {
    s = nlohmann::json::parse(summary_text);
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError("unreadable summary in " + dir.string() + ": " + e.what());
  }
  if (s.value("status", "") != "complete") {
    throw IntegrityError("run " + dir.string() + " did not complete");
  }
  RunRecord rec = from_csv(slurp("record.csv"));
  rec.run_id = s.value("run_id", dir.filename().string());
  rec.criterion_label = s.value("criterion", "");
  rec.prune_ratio = s.value("prune_ratio", 0.0);
  if (s.contains("final_accuracy") && s["final_accuracy"].is_number()) {
    rec.final_accuracy = s["final_accuracy"].get<double>();
  }
  rec.complete = true;
  if (s.contains("stage_seconds")) rec.stage_seconds = s["stage_seconds"].get<std::map<std::string, double>>();
  if (s.contains("warnings")) rec.warnings = s["warnings"].get<std::vector<std::string>>();
  if (s.contains("details")) rec.details = s["details"];
  return rec;
}

}  // namespace chanprune
