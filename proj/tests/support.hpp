// Copyright 2026 The chanprune Authors
// SPDX-License-Identifier: Apache-2.0

// Shared fixtures for the test binaries.

#ifndef CHANPRUNE_TESTS_SUPPORT_HPP_
#define CHANPRUNE_TESTS_SUPPORT_HPP_

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "chanprune/data.hpp"
#include "chanprune/model.hpp"
#include "chanprune/models.hpp"
#include "chanprune/rng.hpp"
#include "chanprune/tensor.hpp"

namespace testing {

using namespace chanprune;

inline FilterTensor random_filters(Rng& rng, const std::string& id, std::size_t n_out,
                                   std::size_t n_in, std::size_t kh, std::size_t kw,
                                   double scale = 1.0) {
  FilterTensor t(id, n_out, n_in, kh, kw);
  for (float& v : t.values()) v = static_cast<float>(rng.uniform(-scale, scale));
  return t;
}

inline Tensor random_tensor(Rng& rng, Shape shape, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (float& v : t.values()) v = static_cast<float>(rng.uniform(-scale, scale));
  return t;
}

inline Batch random_batch(Rng& rng, std::size_t n, std::size_t c, std::size_t h, std::size_t w,
                          std::size_t classes) {
  Batch b;
  b.inputs = random_tensor(rng, {n, c, h, w});
  for (std::size_t i = 0; i < n; ++i) b.labels.push_back(static_cast<int>(rng.below(classes)));
  return b;
}

inline Batch random_batch_for(Rng& rng, const Network& net, std::size_t n) {
  return random_batch(rng, n, net.in_channels(), net.in_height(), net.in_width(), net.classes());
}

/// max |a - b| / max(max |a|, max |b|, tiny).
inline double max_rel_diff(std::span<const float> a, std::span<const float> b) {
  double diff = 0.0, scale = 1e-30;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::fabs(static_cast<double>(a[i]) - b[i]));
    scale = std::max({scale, std::fabs(static_cast<double>(a[i])), std::fabs(static_cast<double>(b[i]))});
  }
  return diff / scale;
}

inline double rel_diff(double a, double b) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-30});
}

/// Unique scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("chanprune_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary);
  f << s;
}

/// Single-conv network: 1 input channel, `filters` 3x3 filters, no pooling,
/// one dense output layer.
inline ArchitectureSpec single_conv_spec(std::size_t filters = 4, std::size_t image = 6,
                                         std::size_t classes = 3) {
  ArchitectureSpec s;
  s.name = "single";
  s.in_channels = 1;
  s.in_height = image;
  s.in_width = image;
  s.conv = {{"conv1", filters, 3, 1, 1}};
  s.dense = {{"fc", classes}};
  return s;
}

}  // namespace testing

#endif  // CHANPRUNE_TESTS_SUPPORT_HPP_
