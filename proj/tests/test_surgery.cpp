// Copyright 2026 The chanprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <set>

#include "chanprune/errors.hpp"
#include "chanprune/surgery.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace chanprune;
using namespace testing;

namespace {

std::vector<std::size_t> random_subset(Rng& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  rng.shuffle(std::span<std::size_t>(idx));
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// Closed-form parameter delta of removing `k` filters from conv layer `l`.
std::size_t removed_params(const Network& net, std::size_t l, std::size_t k) {
  const auto& w = net.conv_layers()[l].weight;
  std::size_t removed = k * (w.filter_size() + 1);
  if (l + 1 < net.conv_layers().size()) {
    const auto& nw = net.conv_layers()[l + 1].weight;
    removed += k * nw.n_out() * nw.kh() * nw.kw();
  } else {
    const auto [h, wd] = net.conv_output_hw(l);
    removed += k * h * wd * net.dense_layers()[0].weight.dim(0);
  }
  return removed;
}

}  // namespace

TEST_CASE("empty prune set is the identity") {
  const Network net = build_model(toy_spec(), 1);
  const Network out = prune_conv_layer(net, "conv1", {});
  CHECK(out == net);
  CHECK(zero_out_filters(net, "conv2", {}) == net);
}

TEST_CASE("lenet conv2 prune drops 400 dense columns") {
  const Network net = build_model(lenet5_spec(), 2);
  CHECK(net.conv_output_hw(1) == std::pair<std::size_t, std::size_t>{4, 4});
  std::vector<std::size_t> idx;
  for (std::size_t j = 0; j < 50; j += 2) idx.push_back(j);
  const SurgeryPlan plan = plan_surgery(net, {{"conv2", idx}});
  CHECK(plan.dropped_dense_columns() == 400);
  CHECK(plan.resulting_filters.at("conv2") == 25);
  const Network out = apply_surgery(net, plan);
  CHECK(out.dense_layers()[0].weight.dim(1) == 800 - 400);
  CHECK(out.conv("conv2").weight.n_out() == 25);
  CHECK(validate_structure(out).empty());
  CHECK(out.parameter_count() == net.parameter_count() - removed_params(net, 1, 25));
}

TEST_CASE("flatten remap is row-major over (channel, h, w)") {
  const Network net = build_model(toy_spec({2, 3}, 8, 2), 3);
  // conv2 output after pooling: 3 channels of 2x2, flattened to 12 columns.
  const SurgeryPlan plan = plan_surgery(net, {{"conv2", {1}}});
  const std::vector<long> expect = {0, 1, 2, 3, -1, -1, -1, -1, 4, 5, 6, 7};
  CHECK(plan.flatten_remap == expect);
  const Network out = apply_surgery(net, plan);
  const auto& before = net.dense_layers()[0].weight;
  const auto& after = out.dense_layers()[0].weight;
  for (std::size_t u = 0; u < 2; ++u) {
    for (std::size_t c = 0; c < 12; ++c) {
      if (expect[c] >= 0) CHECK(after[u * 8 + expect[c]] == before[u * 12 + c]);
    }
  }
  CHECK(out.dense_layers()[0].bias == net.dense_layers()[0].bias);
  const auto j = plan.to_json();
  CHECK(j["prune"]["conv2"] == std::vector<std::size_t>{1});
}

TEST_CASE("surviving parameters are copied bit-exactly") {
  const Network net = build_model(toy_spec({4, 5}), 4);
  const Network out = prune_conv_layer(net, "conv1", std::vector<std::size_t>{0, 2});
  const auto& w = net.conv("conv1").weight;
  const auto& ow = out.conv("conv1").weight;
  for (std::size_t i = 0; i < w.filter_size(); ++i) {
    CHECK(ow.filter(0)[i] == w.filter(1)[i]);
    CHECK(ow.filter(1)[i] == w.filter(3)[i]);
  }
  CHECK(out.conv("conv1").bias == std::vector<float>{net.conv("conv1").bias[1], net.conv("conv1").bias[3]});
  const auto& n2 = net.conv("conv2").weight;
  const auto& o2 = out.conv("conv2").weight;
  CHECK(o2.n_in() == 2);
  for (std::size_t j = 0; j < 5; ++j) {
    for (std::size_t k = 0; k < 9; ++k) {
      CHECK(o2.filter(j)[k] == n2.filter(j)[9 + k]);
      CHECK(o2.filter(j)[9 + k] == n2.filter(j)[27 + k]);
    }
  }
  CHECK(out.conv("conv2").bias == net.conv("conv2").bias);
}

TEST_CASE("surgery errors and input isolation") {
  const Network net = build_model(toy_spec({3, 4}), 5);
  const Network copy = net;
  CHECK_THROWS_AS(prune_conv_layer(net, "conv1", std::vector<std::size_t>{0, 1, 2}), SpecError);
  CHECK_THROWS_AS(prune_conv_layer(net, "conv1", std::vector<std::size_t>{3}), UsageError);
  CHECK_THROWS_AS(prune_conv_layer(net, "conv1", std::vector<std::size_t>{1, 1}), UsageError);
  CHECK_THROWS_AS(prune_conv_layer(net, "conv9", std::vector<std::size_t>{0}), LookupError);
  prune_conv_layer(net, "conv1", std::vector<std::size_t>{1});
  CHECK(net == copy);
}

TEST_CASE("zero-filter equivalence on random toy networks") {
  Rng rng(101);
  for (int trial = 0; trial < 8; ++trial) {
    const std::size_t f1 = 3 + rng.below(6), f2 = 3 + rng.below(6);
    const Network net = build_model(toy_spec({f1, f2}), 200 + trial);
    const std::size_t layer = rng.below(2);
    const std::string id = layer == 0 ? "conv1" : "conv2";
    const std::size_t n = layer == 0 ? f1 : f2;
    const auto idx = random_subset(rng, n, 1 + rng.below(n - 1));

    const Network zeroed = zero_out_filters(net, id, idx);
    for (std::size_t j : idx) {
      for (float v : zeroed.conv(id).weight.filter(j)) CHECK(v == 0.0f);
      CHECK(zeroed.conv(id).bias[j] == 0.0f);
    }
    const Network pruned = prune_conv_layer(zeroed, id, idx);
    const Network direct = prune_conv_layer(net, id, idx);
    CHECK(validate_structure(pruned).empty());

    const Batch b = random_batch_for(rng, net, 20);
    const Tensor y0 = zeroed.forward(b.inputs);
    const Tensor y1 = pruned.forward(b.inputs);
    CHECK(max_rel_diff(y0.values(), y1.values()) <= 1e-5);
    // Zero then prune equals prune alone (the zeroed filters are gone).
    CHECK(pruned == direct);
    CHECK(pruned.parameter_count() == net.parameter_count() - removed_params(net, layer, idx.size()));
  }
}

TEST_CASE("pruning disjoint sets in two calls equals pruning the union") {
  const Network net = build_model(toy_spec({10, 6}), 7);
  const std::vector<std::size_t> a = {1, 4}, b = {2, 7, 9};
  // Indices of b in the network left after removing a.
  std::vector<std::size_t> b_after;
  for (std::size_t j : b) {
    b_after.push_back(j - static_cast<std::size_t>(std::count_if(a.begin(), a.end(),
                                                                  [&](std::size_t x) { return x < j; })));
  }
  const Network two = prune_conv_layer(prune_conv_layer(net, "conv1", a), "conv1", b_after);
  const Network one = prune_conv_layer(net, "conv1", std::vector<std::size_t>{1, 2, 4, 7, 9});
  CHECK(two == one);

  // Across layers the order does not matter either.
  const Network x = prune_conv_layer(prune_conv_layer(net, "conv1", a), "conv2", std::vector<std::size_t>{0, 5});
  const Network y = prune_conv_layer(prune_conv_layer(net, "conv2", std::vector<std::size_t>{0, 5}), "conv1", a);
  CHECK(x == y);
  const Network z = apply_surgery(net, plan_surgery(net, {{"conv1", a}, {"conv2", {0, 5}}}));
  CHECK(x == z);
}

TEST_CASE("validate_structure") {
  CHECK(validate_structure(build_model(lenet5_spec(), 1)).empty());
  CHECK(validate_structure(build_model(alexnet_spec(), 1)).empty());

  Network net = build_model(toy_spec(), 1);
  CHECK(validate_structure(prune_conv_layer(net, "conv2", std::vector<std::size_t>{3})).empty());

  net.conv_layers()[1].weight = FilterTensor("conv2", 16, 7, 3, 3);
  const auto report = validate_structure(net);
  REQUIRE(report.size() == 1);
  CHECK(report[0].find("conv1") != std::string::npos);
  CHECK(report[0].find("conv2") != std::string::npos);

  Network dense_bad = build_model(toy_spec(), 1);
  dense_bad.dense_layers()[0].weight = Tensor({2, 100});
  const auto r2 = validate_structure(dense_bad);
  REQUIRE(r2.size() == 1);
  CHECK(r2[0].find("conv2") != std::string::npos);
  CHECK(r2[0].find("fc") != std::string::npos);
}
