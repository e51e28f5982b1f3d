// Copyright 2026 The chanprune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CHANPRUNE_DIAGNOSTICS_HPP_
#define CHANPRUNE_DIAGNOSTICS_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "chanprune/admm.hpp"
#include "chanprune/model.hpp"
#include "chanprune/record.hpp"

namespace chanprune {

using LayerValues = std::vector<std::pair<std::string, double>>;
using LayerVectors = std::vector<std::pair<std::string, std::vector<double>>>;

/// ||W_i - Z_i||_F for every layer of `state`. Read-only.
LayerValues wz_distance_snapshot(const Network& model, const AdmmState& state);

/// Per-filter l1 norms of every conv layer, in layer order. Read-only.
LayerVectors l1_snapshot(const Network& model);

/// 50 uniform bins over [0, max(values)]; an all-zero input puts everything
/// in bin 0.
std::vector<std::size_t> histogram(const std::vector<double>& values, std::size_t bins = 50);

/// Final accuracy per (prune ratio, criterion label). Rows are ratios in
/// ascending order, columns are labels in first-seen order.
struct ComparisonTable {
  std::vector<double> ratios;
  std::vector<std::string> columns;
  std::vector<std::vector<std::optional<double>>> cells;  // [ratio][column]

  std::string to_csv() const;
  std::string to_markdown() const;
};

ComparisonTable comparison_table(const std::vector<RunRecord>& records);

/// Writes into `out_dir`:
///   metrics/<run_id>/<metric>.csv    per-metric slices of each record
///   comparison.csv, comparison.md    criterion x ratio -> final accuracy
///   plots/accuracy_vs_ratio.png      one line per criterion
///   plots/<run_id>_wz_distance.png   ||W-Z|| per layer over ADMM iterations
///   plots/<run_id>_l1_hist.png       per-layer l1 histograms, last stage
///   plots/<run_id>_accuracy.png      test accuracy across stages
/// Returns the written paths, sorted. Throws UsageError on an empty input and
/// IoError on write failure.
std::vector<std::filesystem::path> export_report(const std::vector<RunRecord>& records,
                                                 const std::filesystem::path& out_dir);

/// Minimal RGB raster used for the report plots.
class Canvas {
 public:
  struct Rgb {
    unsigned char r, g, b;
  };

  Canvas(std::size_t width, std::size_t height, Rgb background = {255, 255, 255});

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  void set(long x, long y, Rgb c);
  Rgb at(std::size_t x, std::size_t y) const;
  void line(long x0, long y0, long x1, long y1, Rgb c);
  void rect(long x0, long y0, long x1, long y1, Rgb c);  // filled, inclusive
  void write_png(const std::filesystem::path& path) const;

 private:
  std::size_t width_, height_;
  std::vector<unsigned char> pixels_;
};

/// Line chart of several series on shared, auto-scaled axes.
void plot_lines(const std::vector<std::vector<std::pair<double, double>>>& series,
                const std::filesystem::path& path);

}  // namespace chanprune

#endif  // CHANPRUNE_DIAGNOSTICS_HPP_
