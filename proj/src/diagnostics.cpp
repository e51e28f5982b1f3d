// Copyright 2026 The chanprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "chanprune/diagnostics.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>

#include "chanprune/errors.hpp"

namespace chanprune {

LayerValues wz_distance_snapshot(const Network& model, const AdmmState& state) {
  LayerValues out;
  for (std::size_t i = 0; i < state.specs.size(); ++i) {
    const std::string& id = state.specs[i].layer_id;
    const FilterTensor& w = model.conv(id).weight;
    require_same_shape(w.shape(), state.z[i].shape(), "wz_distance_snapshot " + id);
    out.emplace_back(id, std::sqrt(squared_distance(w.values(), state.z[i].values())));
  }
  return out;
}

LayerVectors l1_snapshot(const Network& model) {
  LayerVectors out;
  for (const auto& layer : model.conv_layers()) {
    out.emplace_back(layer.id, filter_norms(layer.weight, NormKind::kL1));
  }
  return out;
}

std::vector<std::size_t> histogram(const std::vector<double>& values, std::size_t bins) {
  std::vector<std::size_t> out(std::max<std::size_t>(bins, 1), 0);
  double hi = 0.0;
  for (double v : values) hi = std::max(hi, v);
  for (double v : values) {
    std::size_t b = 0;
    if (hi > 0.0) {
      b = static_cast<std::size_t>(v / hi * static_cast<double>(out.size()));
      b = std::min(b, out.size() - 1);
    }
    ++out[b];
  }
  return out;
}

// --- comparison table ------------------------------------------------------

namespace {

double table_ratio(const RunRecord& r) {
  double ratio = r.prune_ratio;
  if (r.details.contains("nominal_ratio") && r.details["nominal_ratio"].is_number()) {
    ratio = r.details["nominal_ratio"].get<double>();
  }
  return std::round(ratio * 1e4) / 1e4;
}

std::string percent(double ratio) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g%%", ratio * 100.0);
  return buf;
}

}  // namespace

ComparisonTable comparison_table(const std::vector<RunRecord>& records) {
  ComparisonTable t;
  for (const auto& r : records) {
    const double ratio = table_ratio(r);
    if (std::find(t.ratios.begin(), t.ratios.end(), ratio) == t.ratios.end()) t.ratios.push_back(ratio);
    if (std::find(t.columns.begin(), t.columns.end(), r.criterion_label) == t.columns.end()) {
      t.columns.push_back(r.criterion_label);
    }
  }
  std::sort(t.ratios.begin(), t.ratios.end());
  t.cells.assign(t.ratios.size(), std::vector<std::optional<double>>(t.columns.size()));
  for (const auto& r : records) {
    const auto row = std::find(t.ratios.begin(), t.ratios.end(), table_ratio(r)) - t.ratios.begin();
    const auto col = std::find(t.columns.begin(), t.columns.end(), r.criterion_label) - t.columns.begin();
    t.cells[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)] = r.final_accuracy;
  }
  return t;
}

std::string ComparisonTable::to_csv() const {
  std::string out = "ratio";
  for (const auto& c : columns) out += "," + c;
  out += '\n';
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    out += format_value(ratios[i]);
    for (const auto& cell : cells[i]) out += "," + (cell ? format_value(*cell) : std::string());
    out += '\n';
  }
  return out;
}

std::string ComparisonTable::to_markdown() const {
  std::string out = "| ratio |";
  for (const auto& c : columns) out += " " + c + " |";
  out += "\n|---|";
  for (std::size_t i = 0; i < columns.size(); ++i) out += "---|";
  out += '\n';
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    out += "| " + percent(ratios[i]) + " |";
    for (const auto& cell : cells[i]) {
      char buf[32] = "";
      if (cell) std::snprintf(buf, sizeof buf, "%.2f%%", *cell * 100.0);
      out += std::string(" ") + buf + " |";
    }
    out += '\n';
  }
  return out;
}

// --- raster output ---------------------------------------------------------

Canvas::Canvas(std::size_t width, std::size_t height, Rgb background)
    : width_(width), height_(height), pixels_(width * height * 3) {
  for (std::size_t i = 0; i < width * height; ++i) {
    pixels_[3 * i] = background.r;
    pixels_[3 * i + 1] = background.g;
    pixels_[3 * i + 2] = background.b;
  }
}

void Canvas::set(long x, long y, Rgb c) {
  if (x < 0 || y < 0 || x >= static_cast<long>(width_) || y >= static_cast<long>(height_)) return;
  const std::size_t i = 3 * (static_cast<std::size_t>(y) * width_ + static_cast<std::size_t>(x));
  pixels_[i] = c.r;
  pixels_[i + 1] = c.g;
  pixels_[i + 2] = c.b;
}

Canvas::Rgb Canvas::at(std::size_t x, std::size_t y) const {
  const std::size_t i = 3 * (y * width_ + x);
  return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
}

void Canvas::line(long x0, long y0, long x1, long y1, Rgb c) {
  const long dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const long sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  long err = dx + dy;
  while (true) {
    set(x0, y0, c);
    if (x0 == x1 && y0 == y1) break;
    const long e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void Canvas::rect(long x0, long y0, long x1, long y1, Rgb c) {
  for (long y = std::min(y0, y1); y <= std::max(y0, y1); ++y) {
    for (long x = std::min(x0, x1); x <= std::max(x0, x1); ++x) set(x, y, c);
  }
}

void Canvas::write_png(const std::filesystem::path& path) const {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
  if (!fp) throw IoError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width_), static_cast<png_uint_32>(height_), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < height_; ++y) {
    png_write_row(png, const_cast<png_bytep>(pixels_.data() + 3 * y * width_));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

namespace {

constexpr Canvas::Rgb kPalette[] = {{31, 119, 180}, {255, 127, 14}, {44, 160, 44},
                                    {214, 39, 40},  {148, 103, 189}, {140, 86, 75},
                                    {227, 119, 194}, {127, 127, 127}};
constexpr Canvas::Rgb kAxis = {0, 0, 0};
constexpr Canvas::Rgb kGrid = {225, 225, 225};

}  // namespace

void plot_lines(const std::vector<std::vector<std::pair<double, double>>>& series,
                const std::filesystem::path& path) {
  constexpr long W = 640, H = 400, L = 50, R = 20, T = 20, B = 40;
  Canvas canvas(W, H);
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& s : series) {
    for (const auto& [x, y] : s) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  auto px = [&](double x) { return L + std::lround((x - xmin) / (xmax - xmin) * (W - L - R)); };
  auto py = [&](double y) { return H - B - std::lround((y - ymin) / (ymax - ymin) * (H - T - B)); };
  for (int g = 1; g < 5; ++g) {
    const long y = T + g * (H - T - B) / 5;
    canvas.line(L, y, W - R, y, kGrid);
  }
  canvas.line(L, H - B, W - R, H - B, kAxis);
  canvas.line(L, T, L, H - B, kAxis);
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto c = kPalette[i % std::size(kPalette)];
    const auto& s = series[i];
    for (std::size_t k = 0; k < s.size(); ++k) {
      const long x = px(s[k].first), y = py(s[k].second);
      canvas.rect(x - 1, y - 1, x + 1, y + 1, c);
      if (k > 0) canvas.line(px(s[k - 1].first), py(s[k - 1].second), x, y, c);
    }
  }
  canvas.write_png(path);
}

namespace {

void plot_histograms(const std::vector<std::vector<std::size_t>>& hists,
                     const std::filesystem::path& path) {
  constexpr long W = 640, panel = 120, L = 20, R = 20;
  const long H = std::max<long>(1, static_cast<long>(hists.size())) * panel;
  Canvas canvas(W, H);
  for (std::size_t p = 0; p < hists.size(); ++p) {
    const auto& h = hists[p];
    const long top = static_cast<long>(p) * panel + 10, bottom = (static_cast<long>(p) + 1) * panel - 10;
    canvas.line(L, bottom, W - R, bottom, kAxis);
    const std::size_t peak = std::max<std::size_t>(1, *std::max_element(h.begin(), h.end()));
    const double bw = static_cast<double>(W - L - R) / static_cast<double>(h.size());
    for (std::size_t b = 0; b < h.size(); ++b) {
      if (h[b] == 0) continue;
      const long x0 = L + std::lround(static_cast<double>(b) * bw);
      const long x1 = L + std::lround(static_cast<double>(b + 1) * bw) - 1;
      const long y = bottom - std::lround(static_cast<double>(h[b]) / static_cast<double>(peak) *
                                          static_cast<double>(bottom - top));
      canvas.rect(x0, y, x1, bottom - 1, kPalette[p % std::size(kPalette)]);
    }
  }
  canvas.write_png(path);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string safe_name(std::string s) {
  for (char& c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' || c == '+')) c = '_';
  }
  return s;
}

}  // namespace

std::vector<std::filesystem::path> export_report(const std::vector<RunRecord>& records,
                                                 const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  if (records.empty()) throw UsageError("export_report needs at least one record");
  std::vector<fs::path> written;
  fs::create_directories(out_dir / "metrics");
  fs::create_directories(out_dir / "plots");

  for (const auto& r : records) {
    const fs::path dir = out_dir / "metrics" / safe_name(r.run_id);
    fs::create_directories(dir);
    for (const auto& metric : r.metric_names()) {
      const fs::path p = dir / (safe_name(metric) + ".csv");
      write_text(p, r.to_csv(metric));
      written.push_back(p);
    }
  }

  const ComparisonTable table = comparison_table(records);
  write_text(out_dir / "comparison.csv", table.to_csv());
  write_text(out_dir / "comparison.md", table.to_markdown());
  written.push_back(out_dir / "comparison.csv");
  written.push_back(out_dir / "comparison.md");

  // accuracy vs ratio, one line per criterion
  {
    std::vector<std::vector<std::pair<double, double>>> lines(table.columns.size());
    for (std::size_t i = 0; i < table.ratios.size(); ++i) {
      for (std::size_t c = 0; c < table.columns.size(); ++c) {
        if (table.cells[i][c]) lines[c].emplace_back(table.ratios[i], *table.cells[i][c]);
      }
    }
    const fs::path p = out_dir / "plots" / "accuracy_vs_ratio.png";
    plot_lines(lines, p);
    written.push_back(p);
  }

  for (const auto& r : records) {
    const std::string base = safe_name(r.run_id);
    // ||W - Z|| per layer
    std::map<std::string, std::vector<std::pair<double, double>>> wz;
    for (const auto& row : r.rows()) {
      if (row.stage == "admm" && row.metric == "wz_distance") {
        wz[row.layer].emplace_back(static_cast<double>(row.step), row.value);
      }
    }
    if (!wz.empty()) {
      std::vector<std::vector<std::pair<double, double>>> lines;
      for (auto& [layer, pts] : wz) lines.push_back(std::move(pts));
      const fs::path p = out_dir / "plots" / (base + "_wz_distance.png");
      plot_lines(lines, p);
      written.push_back(p);
    }

    // l1 histograms of the last stage that has a snapshot
    std::string last_stage;
    for (const auto& row : r.rows()) {
      if (row.metric == "filter_l1") last_stage = row.stage;
    }
    if (!last_stage.empty()) {
      std::map<std::string, std::vector<double>> per_layer;
      std::vector<std::string> order;
      for (const auto& row : r.rows()) {
        if (row.stage != last_stage || row.metric != "filter_l1") continue;
        if (!per_layer.count(row.layer)) order.push_back(row.layer);
        per_layer[row.layer].push_back(row.value);
      }
      std::vector<std::vector<std::size_t>> hists;
      for (const auto& layer : order) hists.push_back(histogram(per_layer[layer]));
      const fs::path p = out_dir / "plots" / (base + "_l1_hist.png");
      plot_histograms(hists, p);
      written.push_back(p);
    }

    // test accuracy across stages, laid end to end
    std::vector<std::pair<double, double>> acc;
    double x = 0.0;
    for (const auto& row : r.rows()) {
      const bool epoch_acc = row.metric == "test_accuracy";
      const bool prune_acc = row.stage == "prune" && row.metric == "accuracy_after_prune";
      if (!epoch_acc && !prune_acc) continue;
      acc.emplace_back(x, row.value);
      x += 1.0;
    }
    if (!acc.empty()) {
      const fs::path p = out_dir / "plots" / (base + "_accuracy.png");
      plot_lines({acc}, p);
      written.push_back(p);
    }
  }
  std::sort(written.begin(), written.end());
  return written;
}

}  // namespace chanprune
