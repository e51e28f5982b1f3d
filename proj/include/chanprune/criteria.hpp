// Copyright 2026 The chanprune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CHANPRUNE_CRITERIA_HPP_
#define CHANPRUNE_CRITERIA_HPP_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "chanprune/model.hpp"

namespace chanprune {

enum class Criterion { kMinWeight, kMeanActivation, kTaylor, kRandom, kAdmmL1 };

std::string to_string(Criterion c);
/// Accepts min_weight, mean_activation, taylor, random, admm_l1 (alias admm).
Criterion criterion_from_string(const std::string& s);

struct PruneDecision {
  std::string layer_id;
  Criterion criterion = Criterion::kMinWeight;
  std::vector<double> scores;
  std::vector<std::size_t> prune_indices;  // ascending

  nlohmann::json to_json() const;
};

/// l1 norm of each filter's kernel weights.
std::vector<double> score_min_weight(const Network& model, const std::string& layer_id);

/// Mean over all samples of the spatial l1 norm of each filter's post-ReLU
/// map. Throws UsageError when `batches` is empty.
std::vector<double> score_mean_activation(const Network& model, const std::string& layer_id,
                                          std::span<const Batch> batches);

/// Accumulates, for one batch of maps [n, channels, positions], the per-sample
/// first-order saliency |sum_spatial a * g| into `sums` (one entry per
/// channel). `grads` holds per-sample loss gradients.
void accumulate_taylor(std::span<const float> activations, std::span<const float> grads,
                       std::size_t samples, std::size_t channels, std::size_t positions,
                       std::vector<double>& sums);

/// raw / (||raw||_2 + delta).
std::vector<double> l2_rescale(const std::vector<double>& raw, double delta = 1e-12);

/// Unnormalized Taylor saliencies for every conv layer, from a single
/// forward/backward pass per batch.
std::map<std::string, std::vector<double>> taylor_raw_all(const Network& model,
                                                          std::span<const Batch> batches);

/// Layer-rescaled Taylor saliency. Throws NumericError on non-finite
/// gradients, UsageError when `batches` is empty.
std::vector<double> score_taylor(const Network& model, const std::string& layer_id,
                                 std::span<const Batch> batches);

/// A seed-determined permutation of the ranks 0 .. n_filters-1.
std::vector<double> score_random(const std::string& layer_id, std::size_t n_filters,
                                 std::uint64_t seed);

/// The `count` smallest-score indices, ties pruning the lower index first,
/// returned ascending. Throws SpecError if count >= scores.size().
std::vector<std::size_t> select_prune_set(const std::vector<double>& scores, std::size_t count);

/// FNV-1a, stable across platforms; used to derive per-layer seeds.
std::uint64_t stable_hash(const std::string& s);

}  // namespace chanprune

#endif  // CHANPRUNE_CRITERIA_HPP_
