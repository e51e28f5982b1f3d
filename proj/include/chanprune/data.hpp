// Copyright 2026 The chanprune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CHANPRUNE_DATA_HPP_
#define CHANPRUNE_DATA_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "chanprune/tensor.hpp"

namespace chanprune {

/// A minibatch: inputs [N, C, H, W] and one label per sample.
struct Batch {
  Tensor inputs;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
};

/// In-memory labelled image set, inputs already normalized.
struct Dataset {
  std::string name;
  std::string split;
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t classes = 0;
  std::vector<float> images;  // [count, channels, height, width]
  std::vector<int> labels;

  std::size_t count() const noexcept { return labels.size(); }
  std::size_t sample_size() const noexcept { return channels * height * width; }

  /// Gathers the listed samples into a batch.
  Batch gather(std::span<const std::size_t> indices) const;
  /// Samples [begin, end) in storage order.
  Batch slice(std::size_t begin, std::size_t end) const;
};

/// Describes which data to materialize.
struct DatasetHandle {
  std::string name;          // mnist | cifar10 | synthetic
  std::string split = "train";
  double subset_fraction = 1.0;
  std::uint64_t seed = 0;
  std::filesystem::path root;  // directory holding the raw files

  // synthetic only
  std::size_t n_per_class = 0;
  double difficulty = 0.5;
  std::size_t image_size = 16;
};

/// Iterates a dataset in an order fully determined by (seed, epoch).
class BatchSchedule {
 public:
  BatchSchedule(std::size_t count, std::size_t batch_size, std::uint64_t seed);

  std::size_t batches_per_epoch() const noexcept;
  std::size_t batch_size() const noexcept { return batch_size_; }
  /// Sample indices of every batch of one epoch. The last batch may be short.
  std::vector<std::vector<std::size_t>> epoch(std::size_t epoch_index) const;

 private:
  std::size_t count_;
  std::size_t batch_size_;
  std::uint64_t seed_;
};

/// Per-channel normalization constants.
struct Normalization {
  std::vector<float> mean;
  std::vector<float> stddev;
};

Normalization mnist_normalization();
Normalization cifar10_normalization();

/// Loads MNIST / CIFAR-10 from their published binary formats, or builds the
/// synthetic set. Applies the stratified subset. Throws IoError naming the
/// missing path.
Dataset load_dataset(const DatasetHandle& handle);

/// Two-class oriented-grating images: class 0 is horizontal, class 1 vertical
/// stripes, each with random frequency and phase plus pixel noise whose level
/// grows with `difficulty` in [0, 1]. Single channel, image_size x image_size.
Dataset synthetic_dataset(std::uint64_t seed, std::size_t n_per_class, double difficulty,
                          std::size_t image_size = 16);

/// Keeps round(fraction * count_c) samples of each class c, chosen by a seeded
/// permutation, preserving the original relative order.
Dataset stratified_subset(const Dataset& full, double fraction, std::uint64_t seed);

/// Default dataset root: $CHANPRUNE_DATA or ./data.
std::filesystem::path default_data_root();

}  // namespace chanprune

#endif  // CHANPRUNE_DATA_HPP_
