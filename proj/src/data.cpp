// Copyright 2026 The chanprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "chanprune/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>

#include "chanprune/errors.hpp"
#include "chanprune/rng.hpp"

namespace chanprune {

Batch Dataset::gather(std::span<const std::size_t> indices) const {
  const std::size_t ss = sample_size();
  Batch batch{Tensor({indices.size(), channels, height, width}), {}};
  batch.labels.reserve(indices.size());
  float* dst = batch.inputs.data();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t idx = indices[i];
    if (idx >= count()) throw UsageError("sample index out of range");
    std::copy_n(images.begin() + static_cast<std::ptrdiff_t>(idx * ss), ss, dst + i * ss);
    batch.labels.push_back(labels[idx]);
  }
  return batch;
}

Batch Dataset::slice(std::size_t begin, std::size_t end) const {
  std::vector<std::size_t> idx(end - begin);
  std::iota(idx.begin(), idx.end(), begin);
  return gather(idx);
}

BatchSchedule::BatchSchedule(std::size_t count, std::size_t batch_size, std::uint64_t seed)
    : count_(count), batch_size_(batch_size), seed_(seed) {
  if (count == 0) throw UsageError("cannot schedule batches over an empty dataset");
  if (batch_size == 0) throw UsageError("batch size must be positive");
}

std::size_t BatchSchedule::batches_per_epoch() const noexcept {
  return (count_ + batch_size_ - 1) / batch_size_;
}

std::vector<std::vector<std::size_t>> BatchSchedule::epoch(std::size_t epoch_index) const {
  std::vector<std::size_t> order(count_);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = Rng::derive(seed_, 0x5EED0000ULL + epoch_index);
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t b = 0; b < count_; b += batch_size_) {
    const std::size_t e = std::min(count_, b + batch_size_);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                     order.begin() + static_cast<std::ptrdiff_t>(e));
  }
  return out;
}

Normalization mnist_normalization() { return {{0.1307f}, {0.3081f}}; }

Normalization cifar10_normalization() {
  return {{0.4914f, 0.4822f, 0.4465f}, {0.2470f, 0.2435f, 0.2616f}};
}

std::filesystem::path default_data_root() {
  if (const char* env = std::getenv("CHANPRUNE_DATA"); env && *env) return env;
  return "data";
}

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("dataset file not found: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const unsigned char* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

Dataset load_mnist(const std::filesystem::path& root, const std::string& split) {
  const std::string prefix = split == "test" ? "t10k" : "train";
  const auto dir = root / "mnist";
  const auto images_path = dir / (prefix + "-images-idx3-ubyte");
  const auto labels_path = dir / (prefix + "-labels-idx1-ubyte");
  const auto img = read_file(images_path);
  const auto lab = read_file(labels_path);
  if (img.size() < 16 || be32(img.data()) != 2051) {
    throw IntegrityError(images_path.string() + " is not an idx3 image file");
  }
  if (lab.size() < 8 || be32(lab.data()) != 2049) {
    throw IntegrityError(labels_path.string() + " is not an idx1 label file");
  }
  const std::size_t n = be32(img.data() + 4), rows = be32(img.data() + 8),
                    cols = be32(img.data() + 12);
  if (be32(lab.data() + 4) != n || img.size() != 16 + n * rows * cols || lab.size() != 8 + n) {
    throw IntegrityError("MNIST files under " + dir.string() + " are inconsistent");
  }
  Dataset ds;
  ds.name = "mnist";
  ds.split = split;
  ds.channels = 1;
  ds.height = rows;
  ds.width = cols;
  ds.classes = 10;
  const auto norm = mnist_normalization();
  ds.images.resize(n * rows * cols);
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    ds.images[i] = (img[16 + i] / 255.0f - norm.mean[0]) / norm.stddev[0];
  }
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (lab[8 + i] > 9) throw IntegrityError("MNIST label out of range");
    ds.labels[i] = lab[8 + i];
  }
  return ds;
}

Dataset load_cifar10(const std::filesystem::path& root, const std::string& split) {
  const auto dir = root / "cifar-10-batches-bin";
  std::vector<std::filesystem::path> files;
  if (split == "test") {
    files.push_back(dir / "test_batch.bin");
  } else {
    for (int i = 1; i <= 5; ++i) files.push_back(dir / ("data_batch_" + std::to_string(i) + ".bin"));
  }
  constexpr std::size_t kPixels = 3 * 32 * 32;
  constexpr std::size_t kRecord = 1 + kPixels;
  Dataset ds;
  ds.name = "cifar10";
  ds.split = split;
  ds.channels = 3;
  ds.height = 32;
  ds.width = 32;
  ds.classes = 10;
  const auto norm = cifar10_normalization();
  for (const auto& f : files) {
    const auto raw = read_file(f);
    if (raw.size() % kRecord != 0) throw IntegrityError(f.string() + " has a partial record");
    for (std::size_t r = 0; r < raw.size() / kRecord; ++r) {
      const unsigned char* rec = raw.data() + r * kRecord;
      if (rec[0] > 9) throw IntegrityError("CIFAR-10 label out of range in " + f.string());
      ds.labels.push_back(rec[0]);
      for (std::size_t i = 0; i < kPixels; ++i) {
        const std::size_t c = i / 1024;
        ds.images.push_back((rec[1 + i] / 255.0f - norm.mean[c]) / norm.stddev[c]);
      }
    }
  }
  return ds;
}

}  // namespace

Dataset stratified_subset(const Dataset& full, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw UsageError("subset fraction must lie in (0, 1]");
  }
  if (fraction == 1.0) return full;
  std::vector<std::vector<std::size_t>> by_class(full.classes);
  for (std::size_t i = 0; i < full.count(); ++i) {
    by_class.at(static_cast<std::size_t>(full.labels[i])).push_back(i);
  }
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    Rng rng = Rng::derive(seed, 0x5B5E7000ULL + c);
    rng.shuffle(std::span<std::size_t>(members));
    const auto n = static_cast<std::size_t>(std::llround(fraction * members.size()));
    keep.insert(keep.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n));
  }
  std::sort(keep.begin(), keep.end());
  Dataset out = full;
  Batch b = full.gather(keep);
  out.images.assign(b.inputs.values().begin(), b.inputs.values().end());
  out.labels = std::move(b.labels);
  return out;
}

Dataset synthetic_dataset(std::uint64_t seed, std::size_t n_per_class, double difficulty,
                          std::size_t image_size) {
  if (n_per_class == 0) throw UsageError("synthetic dataset needs n_per_class >= 1");
  if (image_size < 4) throw UsageError("synthetic images must be at least 4x4");
  difficulty = std::clamp(difficulty, 0.0, 1.0);
  Dataset ds;
  ds.name = "synthetic";
  ds.split = "train";
  ds.channels = 1;
  ds.height = image_size;
  ds.width = image_size;
  ds.classes = 2;
  Rng rng(Rng::mix(seed) ^ 0x53594E5448ULL);
  const double s = static_cast<double>(image_size);
  const double jitter = difficulty * std::numbers::pi / 7.0;
  const double noise = 0.15 + 0.85 * difficulty;
  for (std::size_t i = 0; i < 2 * n_per_class; ++i) {
    const int label = static_cast<int>(i % 2);
    const double theta = (label == 0 ? 0.0 : std::numbers::pi / 2.0) + rng.uniform(-jitter, jitter);
    const double freq = rng.uniform(1.5, 3.5);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double amplitude = rng.uniform(0.7, 1.3);
    const double ct = std::cos(theta), st = std::sin(theta);
    for (std::size_t y = 0; y < image_size; ++y) {
      for (std::size_t x = 0; x < image_size; ++x) {
        // stripes run along theta; intensity varies across it
        const double across = -st * static_cast<double>(x) + ct * static_cast<double>(y);
        const double v = amplitude * std::sin(2.0 * std::numbers::pi * freq * across / s + phase);
        ds.images.push_back(static_cast<float>(v + noise * rng.normal()));
      }
    }
    ds.labels.push_back(label);
  }
  return ds;
}

Dataset load_dataset(const DatasetHandle& handle) {
  Dataset full;
  if (handle.name == "mnist") {
    full = load_mnist(handle.root, handle.split);
  } else if (handle.name == "cifar10") {
    full = load_cifar10(handle.root, handle.split);
  } else if (handle.name == "synthetic") {
    // train and test draw from disjoint streams of the same generator
    const std::uint64_t stream = handle.split == "test" ? Rng::mix(handle.seed + 1) : handle.seed;
    full = synthetic_dataset(stream, handle.n_per_class, handle.difficulty, handle.image_size);
    full.split = handle.split;
  } else {
    throw UsageError("unknown dataset " + handle.name);
  }
  return stratified_subset(full, handle.subset_fraction, handle.seed);
}

}  // namespace chanprune
