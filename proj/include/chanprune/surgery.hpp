// Copyright 2026 The chanprune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CHANPRUNE_SURGERY_HPP_
#define CHANPRUNE_SURGERY_HPP_

#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "chanprune/model.hpp"

namespace chanprune {

/// What a structural prune will do. flatten_remap maps every input column of
/// the first dense layer to its new index, or -1 when dropped. Flattening is
/// row-major over (channel, height, width).
struct SurgeryPlan {
  std::map<std::string, std::vector<std::size_t>> prune;
  std::map<std::string, std::size_t> resulting_filters;
  std::vector<long> flatten_remap;

  std::size_t dropped_dense_columns() const;
  nlohmann::json to_json() const;
};

/// Validates the index sets (UsageError on out-of-range or duplicate,
/// SpecError when a layer would lose every filter) and builds the plan.
SurgeryPlan plan_surgery(const Network& model,
                         const std::map<std::string, std::vector<std::size_t>>& prune);

/// Returns a new network with the planned filters removed, the successor's
/// input channels (or first dense columns) removed to match, and every
/// surviving parameter copied bit-exactly. `model` is not modified.
Network apply_surgery(const Network& model, const SurgeryPlan& plan);

Network prune_conv_layer(const Network& model, const std::string& layer_id,
                         std::span<const std::size_t> prune_indices);

/// Copy of `model` with the listed filters' weights and biases set to 0.
Network zero_out_filters(const Network& model, const std::string& layer_id,
                         std::span<const std::size_t> prune_indices);

/// Human-readable channel/shape violations; empty when consistent.
std::vector<std::string> validate_structure(const Network& model);

}  // namespace chanprune

#endif  // CHANPRUNE_SURGERY_HPP_
