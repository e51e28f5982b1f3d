// Copyright 2026 The chanprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "chanprune/models.hpp"

#include <cmath>

#include "chanprune/errors.hpp"
#include "chanprune/rng.hpp"

namespace chanprune {

ArchitectureSpec lenet5_spec(std::vector<std::size_t> filters) {
  if (filters.size() != 2) throw SpecError("lenet5 needs exactly 2 conv filter counts");
  ArchitectureSpec s;
  s.name = "lenet5";
  s.in_channels = 1;
  s.in_height = 28;
  s.in_width = 28;
  s.conv = {{"conv1", filters[0], 5, 0, 2}, {"conv2", filters[1], 5, 0, 2}};
  s.dense = {{"fc1", 500}, {"fc2", 10}};
  return s;
}

ArchitectureSpec alexnet_spec(std::vector<std::size_t> filters) {
  if (filters.size() != 5) throw SpecError("alexnet needs exactly 5 conv filter counts");
  ArchitectureSpec s;
  s.name = "alexnet";
  s.in_channels = 3;
  s.in_height = 32;
  s.in_width = 32;
  s.conv = {{"conv1", filters[0], 5, 2, 2},
            {"conv2", filters[1], 3, 1, 2},
            {"conv3", filters[2], 3, 1, 1},
            {"conv4", filters[3], 3, 1, 1},
            {"conv5", filters[4], 3, 1, 2}};
  s.dense = {{"fc6", 512}, {"fc7", 512}, {"fc8", 10}};
  return s;
}

ArchitectureSpec toy_spec(std::vector<std::size_t> filters, std::size_t image_size,
                          std::size_t classes) {
  if (filters.empty()) throw SpecError("toy network needs at least one conv layer");
  ArchitectureSpec s;
  s.name = "toy";
  s.in_channels = 1;
  s.in_height = image_size;
  s.in_width = image_size;
  for (std::size_t i = 0; i < filters.size(); ++i) {
    s.conv.push_back({"conv" + std::to_string(i + 1), filters[i], 3, 1, 2});
  }
  s.dense = {{"fc", classes}};
  return s;
}

ArchitectureSpec architecture_by_name(const std::string& name,
                                      const std::vector<std::size_t>& filters) {
  if (name == "lenet5") return filters.empty() ? lenet5_spec() : lenet5_spec(filters);
  if (name == "alexnet") return filters.empty() ? alexnet_spec() : alexnet_spec(filters);
  if (name == "toy") return filters.empty() ? toy_spec() : toy_spec(filters);
  throw SpecError("unknown architecture " + name);
}

Network build_model(const ArchitectureSpec& spec, std::uint64_t seed) {
  Network net(spec);
  std::uint64_t tag = 0;
  auto init = [&](std::span<float> w, std::size_t fan_in) {
    Rng rng = Rng::derive(seed, 0x1417000ULL + tag++);
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (float& v : w) v = static_cast<float>(rng.uniform(-bound, bound));
  };
  for (auto& c : net.conv_layers()) init(c.weight.values(), c.weight.filter_size());
  for (auto& d : net.dense_layers()) init(d.weight.values(), d.weight.dim(1));
  return net;
}

}  // namespace chanprune
