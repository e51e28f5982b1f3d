// Copyright 2026 The chanprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "chanprune/criteria.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "chanprune/admm.hpp"
#include "chanprune/errors.hpp"
#include "chanprune/rng.hpp"

namespace chanprune {

std::string to_string(Criterion c) {
  switch (c) {
    case Criterion::kMinWeight:
      return "min_weight";
    case Criterion::kMeanActivation:
      return "mean_activation";
    case Criterion::kTaylor:
      return "taylor";
    case Criterion::kRandom:
      return "random";
    case Criterion::kAdmmL1:
      return "admm_l1";
  }
  return "unknown";
}

Criterion criterion_from_string(const std::string& s) {
  if (s == "min_weight") return Criterion::kMinWeight;
  if (s == "mean_activation") return Criterion::kMeanActivation;
  if (s == "taylor") return Criterion::kTaylor;
  if (s == "random") return Criterion::kRandom;
  if (s == "admm_l1" || s == "admm") return Criterion::kAdmmL1;
  throw ConfigError("unknown criterion '" + s + "'");
}

nlohmann::json PruneDecision::to_json() const {
  return {{"layer", layer_id},
          {"criterion", to_string(criterion)},
          {"scores", scores},
          {"prune_indices", prune_indices}};
}

std::vector<double> score_min_weight(const Network& model, const std::string& layer_id) {
  return filter_norms(model.conv(layer_id).weight, NormKind::kL1);
}

std::vector<double> score_mean_activation(const Network& model, const std::string& layer_id,
                                          std::span<const Batch> batches) {
  if (batches.empty()) throw UsageError("mean-activation criterion needs at least one batch");
  const std::size_t l = model.conv_index(layer_id);
  const std::size_t channels = model.conv_layers()[l].weight.n_out();
  std::vector<double> sums(channels, 0.0);
  std::size_t samples = 0;
  for (const Batch& batch : batches) {
    const ActivationProbe probe = model.probe(batch, false);
    const Tensor& a = probe.activations[l];
    const std::size_t n = a.dim(0), positions = a.dim(2) * a.dim(3);
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t c = 0; c < channels; ++c) {
        const float* map = a.data() + (s * channels + c) * positions;
        double acc = 0.0;
        for (std::size_t p = 0; p < positions; ++p) acc += std::fabs(static_cast<double>(map[p]));
        sums[c] += acc;
      }
    }
    samples += n;
  }
  for (double& v : sums) v /= static_cast<double>(samples);
  return sums;
}

void accumulate_taylor(std::span<const float> activations, std::span<const float> grads,
                       std::size_t samples, std::size_t channels, std::size_t positions,
                       std::vector<double>& sums) {
  if (activations.size() != samples * channels * positions || grads.size() != activations.size()) {
    throw DimensionError("taylor accumulation: activation/gradient sizes disagree");
  }
  sums.resize(channels, 0.0);
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t base = (s * channels + c) * positions;
      double dot = 0.0;
      for (std::size_t p = 0; p < positions; ++p) {
        dot += static_cast<double>(activations[base + p]) * grads[base + p];
      }
      sums[c] += std::fabs(dot);
    }
  }
}

std::vector<double> l2_rescale(const std::vector<double>& raw, double delta) {
  double sq = 0.0;
  for (double v : raw) sq += v * v;
  const double denom = std::sqrt(sq) + delta;
  std::vector<double> out(raw.size());
  std::transform(raw.begin(), raw.end(), out.begin(), [&](double v) { return v / denom; });
  return out;
}

std::map<std::string, std::vector<double>> taylor_raw_all(const Network& model,
                                                          std::span<const Batch> batches) {
  if (batches.empty()) throw UsageError("taylor criterion needs at least one batch");
  const auto& layers = model.conv_layers();
  std::vector<std::vector<double>> sums(layers.size());
  std::size_t samples = 0;
  for (const Batch& batch : batches) {
    const ActivationProbe probe = model.probe(batch, true);
    const std::size_t n = batch.size();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const Tensor& a = probe.activations[l];
      // gradients are of the batch-mean loss; scale to per-sample losses
      std::vector<float> g(probe.activation_grads[l].values().begin(),
                           probe.activation_grads[l].values().end());
      for (float& v : g) {
        v *= static_cast<float>(n);
        if (!std::isfinite(v)) throw NumericError(layers[l].id, "non-finite activation gradient");
      }
      accumulate_taylor(a.values(), g, n, a.dim(1), a.dim(2) * a.dim(3), sums[l]);
    }
    samples += n;
  }
  std::map<std::string, std::vector<double>> out;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (double& v : sums[l]) v /= static_cast<double>(samples);
    out[layers[l].id] = std::move(sums[l]);
  }
  return out;
}

std::vector<double> score_taylor(const Network& model, const std::string& layer_id,
                                 std::span<const Batch> batches) {
  model.conv_index(layer_id);
  return l2_rescale(taylor_raw_all(model, batches).at(layer_id));
}

std::uint64_t stable_hash(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<double> score_random(const std::string& layer_id, std::size_t n_filters,
                                 std::uint64_t seed) {
  if (n_filters == 0) throw UsageError("random criterion needs at least one filter");
  std::vector<double> ranks(n_filters);
  std::iota(ranks.begin(), ranks.end(), 0.0);
  Rng rng = Rng::derive(seed, stable_hash(layer_id));
  rng.shuffle(std::span<double>(ranks));
  return ranks;
}

std::vector<std::size_t> select_prune_set(const std::vector<double>& scores, std::size_t count) {
  if (count >= scores.size()) {
    throw SpecError("cannot prune " + std::to_string(count) + " of " +
                    std::to_string(scores.size()) + " filters; at least one must survive");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  order.resize(count);
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace chanprune
