// Copyright 2026 The chanprune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CHANPRUNE_RECORD_HPP_
#define CHANPRUNE_RECORD_HPP_

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

namespace chanprune {

struct MetricRow {
  std::string stage;
  std::size_t step = 0;
  std::string layer;  // empty for network-wide metrics
  std::string metric;
  double value = 0.0;
};

/// Stage-tagged metric time series of one pipeline run plus its summary.
///
/// Within a stage, steps of each (metric, layer) pair must strictly increase;
/// values must be finite, and accuracies must lie in [0, 1].
class RunRecord {
 public:
  std::string run_id;
  std::string criterion_label;
  double prune_ratio = 0.0;  // pruned filters / total conv filters
  std::optional<double> final_accuracy;
  bool complete = false;
  std::map<std::string, double> stage_seconds;  // wall clock, summary only
  std::vector<std::string> warnings;
  nlohmann::json details = nlohmann::json::object();

  /// Throws UsageError when an invariant above would break.
  void add(const std::string& stage, std::size_t step, const std::string& layer,
           const std::string& metric, double value);

  const std::vector<MetricRow>& rows() const noexcept { return rows_; }
  std::vector<std::pair<std::size_t, double>> series(const std::string& stage,
                                                     const std::string& metric,
                                                     const std::string& layer = "") const;
  /// Last recorded value, if any.
  std::optional<double> last(const std::string& stage, const std::string& metric,
                             const std::string& layer = "") const;
  std::vector<std::string> metric_names() const;  // sorted, unique

  /// `stage,step,layer,metric,value`, one row per recorded point, values
  /// printed with 10 significant digits.
  std::string to_csv() const;
  std::string to_csv(const std::string& metric) const;
  static RunRecord from_csv(const std::string& text);

  nlohmann::json summary() const;

  /// Writes record.csv and summary.json into `dir`.
  void write(const std::filesystem::path& dir) const;
  /// Reads a run directory. Throws IoError when files are missing and
  /// IntegrityError when the run did not complete.
  static RunRecord read(const std::filesystem::path& dir);

 private:
  std::vector<MetricRow> rows_;
  std::map<std::tuple<std::string, std::string, std::string>, std::size_t> last_step_;
};

std::string format_value(double v);

}  // namespace chanprune

#endif  // CHANPRUNE_RECORD_HPP_
