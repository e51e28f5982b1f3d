// Copyright 2026 The chanprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "chanprune/surgery.hpp"

#include <algorithm>
#include <set>

#include "chanprune/errors.hpp"

namespace chanprune {

namespace {

std::vector<std::size_t> checked_indices(const std::string& layer_id,
                                         std::span<const std::size_t> indices,
                                         std::size_t n_filters) {
  std::set<std::size_t> unique;
  for (std::size_t i : indices) {
    if (i >= n_filters) {
      throw UsageError("filter index " + std::to_string(i) + " out of range for " + layer_id +
                       " with " + std::to_string(n_filters) + " filters");
    }
    if (!unique.insert(i).second) {
      throw UsageError("filter index " + std::to_string(i) + " repeated for " + layer_id);
    }
  }
  if (unique.size() >= n_filters) {
    throw SpecError("pruning every filter of " + layer_id + " is not allowed");
  }
  return {unique.begin(), unique.end()};
}

std::vector<std::size_t> survivors(std::size_t n, const std::vector<std::size_t>& pruned) {
  std::vector<std::size_t> keep;
  std::size_t p = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (p < pruned.size() && pruned[p] == i) {
      ++p;
    } else {
      keep.push_back(i);
    }
  }
  return keep;
}

}  // namespace

std::size_t SurgeryPlan::dropped_dense_columns() const {
  return static_cast<std::size_t>(std::count(flatten_remap.begin(), flatten_remap.end(), -1L));
}

nlohmann::json SurgeryPlan::to_json() const {
  nlohmann::json j;
  j["prune"] = prune;
  j["resulting_filters"] = resulting_filters;
  j["flatten_columns_before"] = flatten_remap.size();
  j["flatten_columns_dropped"] = dropped_dense_columns();
  return j;
}

SurgeryPlan plan_surgery(const Network& model,
                         const std::map<std::string, std::vector<std::size_t>>& prune) {
  SurgeryPlan plan;
  for (const auto& [id, indices] : prune) {
    const auto& layer = model.conv(id);
    plan.prune[id] = checked_indices(id, indices, layer.weight.n_out());
  }
  for (const auto& layer : model.conv_layers()) {
    const auto it = plan.prune.find(layer.id);
    const std::size_t removed = it == plan.prune.end() ? 0 : it->second.size();
    plan.resulting_filters[layer.id] = layer.weight.n_out() - removed;
  }
  if (!model.conv_layers().empty() && !model.dense_layers().empty()) {
    const auto& last = model.conv_layers().back();
    const auto [h, w] = model.conv_output_hw(model.conv_layers().size() - 1);
    const std::size_t spatial = h * w;
    std::vector<bool> dropped(last.weight.n_out(), false);
    if (auto it = plan.prune.find(last.id); it != plan.prune.end()) {
      for (std::size_t j : it->second) dropped[j] = true;
    }
    plan.flatten_remap.resize(last.weight.n_out() * spatial);
    long next = 0;
    for (std::size_t c = 0; c < last.weight.n_out(); ++c) {
      for (std::size_t p = 0; p < spatial; ++p) {
        plan.flatten_remap[c * spatial + p] = dropped[c] ? -1 : next++;
      }
    }
  }
  return plan;
}

Network apply_surgery(const Network& model, const SurgeryPlan& plan) {
  Network out = model;
  auto& convs = out.conv_layers();
  std::vector<std::size_t> keep_prev;  // surviving output channels of the previous conv
  bool prev_pruned = false;
  for (std::size_t l = 0; l < convs.size(); ++l) {
    ConvLayer& layer = convs[l];
    const FilterTensor& w = layer.weight;
    const auto it = plan.prune.find(layer.id);
    const std::vector<std::size_t> pruned = it == plan.prune.end() ? std::vector<std::size_t>{}
                                                                   : it->second;
    const std::vector<std::size_t> keep_out = survivors(w.n_out(), pruned);
    const std::vector<std::size_t> keep_in =
        prev_pruned ? keep_prev : survivors(w.n_in(), {});
    if (!pruned.empty() || prev_pruned) {
      FilterTensor nw(layer.id, keep_out.size(), keep_in.size(), w.kh(), w.kw());
      const std::size_t k2 = w.kh() * w.kw();
      for (std::size_t a = 0; a < keep_out.size(); ++a) {
        const auto src = w.filter(keep_out[a]);
        auto dst = nw.filter(a);
        for (std::size_t b = 0; b < keep_in.size(); ++b) {
          std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(keep_in[b] * k2), k2,
                      dst.begin() + static_cast<std::ptrdiff_t>(b * k2));
        }
      }
      std::vector<float> nb;
      for (std::size_t j : keep_out) nb.push_back(layer.bias[j]);
      layer.weight = std::move(nw);
      layer.bias = std::move(nb);
    }
    prev_pruned = !pruned.empty();
    keep_prev = keep_out;
  }

  if (prev_pruned && !out.dense_layers().empty()) {
    DenseLayer& fc = out.dense_layers().front();
    const std::size_t units = fc.weight.dim(0), before = fc.weight.dim(1);
    if (plan.flatten_remap.size() != before) {
      throw StructuralError("flatten remap covers " + std::to_string(plan.flatten_remap.size()) +
                            " columns but " + fc.id + " has " + std::to_string(before));
    }
    const std::size_t after = before - plan.dropped_dense_columns();
    Tensor nw({units, after});
    for (std::size_t r = 0; r < units; ++r) {
      for (std::size_t c = 0; c < before; ++c) {
        const long dst = plan.flatten_remap[c];
        if (dst >= 0) nw[r * after + static_cast<std::size_t>(dst)] = fc.weight[r * before + c];
      }
    }
    fc.weight = std::move(nw);
  }
  return out;
}

Network prune_conv_layer(const Network& model, const std::string& layer_id,
                         std::span<const std::size_t> prune_indices) {
  return apply_surgery(
      model, plan_surgery(model, {{layer_id, {prune_indices.begin(), prune_indices.end()}}}));
}

Network zero_out_filters(const Network& model, const std::string& layer_id,
                         std::span<const std::size_t> prune_indices) {
  Network out = model;
  ConvLayer& layer = out.conv(layer_id);
  for (std::size_t j : checked_indices(layer_id, prune_indices, layer.weight.n_out())) {
    auto f = layer.weight.filter(j);
    std::fill(f.begin(), f.end(), 0.0f);
    layer.bias[j] = 0.0f;
  }
  return out;
}

std::vector<std::string> validate_structure(const Network& model) {
  std::vector<std::string> report;
  std::size_t channels = model.in_channels();
  std::string prev = "input";
  long h = static_cast<long>(model.in_height()), w = static_cast<long>(model.in_width());
  for (const auto& c : model.conv_layers()) {
    if (c.weight.n_in() != channels) {
      report.push_back(prev + " -> " + c.id + ": " + prev + " produces " +
                       std::to_string(channels) + " channels, " + c.id + " expects " +
                       std::to_string(c.weight.n_in()));
    }
    if (c.bias.size() != c.weight.n_out()) {
      report.push_back(c.id + ": bias has " + std::to_string(c.bias.size()) + " entries for " +
                       std::to_string(c.weight.n_out()) + " filters");
    }
    h = (h + 2 * static_cast<long>(c.padding) - static_cast<long>(c.weight.kh()) + 1) /
        static_cast<long>(c.pool);
    w = (w + 2 * static_cast<long>(c.padding) - static_cast<long>(c.weight.kw()) + 1) /
        static_cast<long>(c.pool);
    if (h < 1 || w < 1) report.push_back(c.id + ": feature map shrinks below 1x1");
    channels = c.weight.n_out();
    prev = c.id;
  }
  std::size_t features = channels * static_cast<std::size_t>(std::max(h, 0L)) *
                         static_cast<std::size_t>(std::max(w, 0L));
  for (const auto& d : model.dense_layers()) {
    if (d.weight.rank() != 2 || d.weight.dim(1) != features) {
      report.push_back(prev + " -> " + d.id + ": " + prev + " produces " +
                       std::to_string(features) + " features, " + d.id + " expects " +
                       (d.weight.rank() == 2 ? std::to_string(d.weight.dim(1)) : "?"));
    }
    if (d.weight.rank() == 2 && d.bias.size() != d.weight.dim(0)) {
      report.push_back(d.id + ": bias has " + std::to_string(d.bias.size()) + " entries for " +
                       std::to_string(d.weight.dim(0)) + " units");
    }
    features = d.weight.rank() == 2 ? d.weight.dim(0) : 0;
    prev = d.id;
  }
  return report;
}

}  // namespace chanprune
