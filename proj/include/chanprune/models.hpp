// Copyright 2026 The chanprune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CHANPRUNE_MODELS_HPP_
#define CHANPRUNE_MODELS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "chanprune/model.hpp"

namespace chanprune {

/// LeNet-5 with widened conv layers: 28x28x1 input, 5x5 kernels, 2x2 max
/// pooling after each conv, dense 500 -> 10.
ArchitectureSpec lenet5_spec(std::vector<std::size_t> filters = {20, 50});

/// AlexNet adapted to 32x32x3 inputs: five conv layers (5x5 then 3x3, all
/// "same" padded), 2x2 max pooling after conv1, conv2 and conv5, dense
/// 512 -> 512 -> 10. No local response normalization.
ArchitectureSpec alexnet_spec(std::vector<std::size_t> filters = {64, 192, 384, 256, 256});

/// Small two-conv network for tests and the CI fixture: 3x3 "same" convs,
/// 2x2 max pooling after each, a single dense output layer.
ArchitectureSpec toy_spec(std::vector<std::size_t> filters = {8, 16},
                          std::size_t image_size = 16, std::size_t classes = 2);

/// Looks up lenet5 | alexnet | toy. An empty `filters` keeps the defaults.
ArchitectureSpec architecture_by_name(const std::string& name,
                                      const std::vector<std::size_t>& filters = {});

/// Builds the network with He-uniform weights (bound sqrt(6 / fan_in)) drawn
/// from a stream derived from `seed`, and zero biases.
Network build_model(const ArchitectureSpec& spec, std::uint64_t seed);

}  // namespace chanprune

#endif  // CHANPRUNE_MODELS_HPP_
