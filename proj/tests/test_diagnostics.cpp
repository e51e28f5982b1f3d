// Copyright 2026 The chanprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "chanprune/admm.hpp"
#include "chanprune/diagnostics.hpp"
#include "chanprune/errors.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace chanprune;
using namespace testing;

namespace {

RunRecord finished(const std::string& id, const std::string& label, double ratio, double acc) {
  RunRecord r;
  r.run_id = id;
  r.criterion_label = label;
  r.prune_ratio = ratio;
  r.details["nominal_ratio"] = ratio;
  r.final_accuracy = acc;
  r.complete = true;
  return r;
}

RunRecord with_history(const std::string& id, double ratio, double acc) {
  RunRecord r = finished(id, "admm_l1", ratio, acc);
  for (std::size_t k = 0; k < 5; ++k) {
    r.add("admm", k, "conv1", "wz_distance", 1.0 / (1.0 + k));
    r.add("admm", k, "conv2", "wz_distance", 2.0 / (1.0 + k));
    r.add("admm", k + 1, "", "test_accuracy", 0.5 + 0.05 * k);
  }
  for (std::size_t j = 0; j < 8; ++j) r.add("finetune", j, "conv1", "filter_l1", j < 4 ? 0.0 : 1.0 + j);
  r.add("finetune", 1, "", "test_accuracy", acc);
  return r;
}

}  // namespace

TEST_CASE("wz_distance_snapshot") {
  Network net = build_model(toy_spec({3, 4}), 1);
  std::vector<LayerSparsitySpec> specs;
  for (const auto& l : net.list_conv_layers()) {
    specs.push_back(LayerSparsitySpec::make(l.layer_id, l.n_filters, 0.5, 1e-3, 1.0));
  }
  AdmmState state = init_state(net, specs);

  SUBCASE("W equal to Z gives zero") {
    state.z[0] = net.get_weights("conv1");
    const auto d = wz_distance_snapshot(net, state);
    CHECK(d[0] == std::pair<std::string, double>{"conv1", 0.0});
  }
  SUBCASE("single-element layer") {
    Network one = build_model(toy_spec({1, 1}, 8, 2), 2);
    FilterTensor w("conv1", 1, 1, 3, 3);
    w[4] = 3.0f;
    one.set_weights("conv1", w);
    AdmmState s = init_state(one, {LayerSparsitySpec::make("conv1", 1, 0.0, 1e-3, 1.0),
                                   LayerSparsitySpec::make("conv2", 1, 0.0, 1e-3, 1.0)});
    FilterTensor z = w;
    z[4] = 1.0f;
    s.z[0] = z;
    CHECK(wz_distance_snapshot(one, s)[0].second == 2.0);
  }
  SUBCASE("naive oracle and read-only") {
    Rng rng(4);
    for (auto& z : state.z) z = random_filters(rng, z.layer_id(), z.n_out(), z.n_in(), 3, 3);
    const Network before = net;
    const std::vector<FilterTensor> z_before = state.z;
    const auto d = wz_distance_snapshot(net, state);
    for (std::size_t i = 0; i < d.size(); ++i) {
      const auto& w = net.conv(d[i].first).weight;
      double s = 0.0;
      for (std::size_t e = 0; e < w.size(); ++e) s += (double(w[e]) - state.z[i][e]) * (double(w[e]) - state.z[i][e]);
      CHECK(d[i].second == doctest::Approx(std::sqrt(s)).epsilon(1e-12));
      CHECK(state.z[i].same_values(z_before[i]));
    }
    CHECK(net == before);
  }
}

TEST_CASE("l1_snapshot and histogram") {
  Network net = build_model(toy_spec({3, 4}), 1);
  FilterTensor w = net.get_weights("conv1");
  for (float& v : w.filter(1)) v = 0.0f;
  net.set_weights("conv1", w);
  const auto snap = l1_snapshot(net);
  REQUIRE(snap.size() == 2);
  CHECK(snap[0].first == "conv1");
  CHECK(snap[0].second.size() == 3);
  CHECK(snap[0].second[1] == 0.0);
  CHECK(snap[1].second.size() == 4);

  const auto h = histogram({0.0, 0.0, 1.0, 0.5, 0.49});
  CHECK(h.size() == 50);
  CHECK(h[0] == 2);
  CHECK(h[49] == 1);
  CHECK(h[25] == 1);
  CHECK(h[24] == 1);
  const auto z = histogram({0.0, 0.0});
  CHECK(z[0] == 2);
  CHECK(histogram({}, 4) == std::vector<std::size_t>{0, 0, 0, 0});
}

TEST_CASE("comparison table over ratios and criteria") {
  std::vector<RunRecord> rs;
  const std::vector<std::string> labels = {"admm_l1", "min_weight", "mean_activation", "taylor",
                                           "random", "iterative_te", "iterative_te+ft"};
  for (double ratio : {0.875, 0.5, 0.75}) {
    for (std::size_t c = 0; c < labels.size(); ++c) {
      if (ratio == 0.75 && labels[c] == "random") continue;  // a missing cell
      rs.push_back(finished(labels[c] + std::to_string(ratio), labels[c], ratio, 0.9 - 0.01 * c - ratio / 10));
    }
  }
  const ComparisonTable t = comparison_table(rs);
  CHECK(t.ratios == std::vector<double>{0.5, 0.75, 0.875});
  CHECK(t.columns == labels);
  CHECK_FALSE(t.cells[1][4].has_value());
  CHECK(*t.cells[0][0] == doctest::Approx(0.85));

  const std::string md = t.to_markdown();
  CHECK(md.rfind("| ratio | admm_l1 | min_weight |", 0) == 0);
  CHECK(md.find("| 50% | 85.00% |") != std::string::npos);
  CHECK(md.find("| 87.5% |") != std::string::npos);
  const std::string csv = t.to_csv();
  CHECK(csv.find("0.875,") != std::string::npos);
  CHECK(csv.find(",,") != std::string::npos);

  const ComparisonTable one = comparison_table({finished("x", "taylor", 0.5, 0.75)});
  CHECK(one.to_csv() == "ratio,taylor\n0.5,0.75\n");
}

TEST_CASE("export_report writes deterministic files") {
  TempDir a, b;
  const std::vector<RunRecord> rs = {with_history("run-a", 0.5, 0.9), with_history("run b", 0.75, 0.8),
                                     finished("bare", "taylor", 0.5, 0.7)};
  const auto pa = export_report(rs, a.path());
  const auto pb = export_report(rs, b.path());
  REQUIRE(pa.size() == pb.size());
  CHECK(std::is_sorted(pa.begin(), pa.end()));
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(std::filesystem::relative(pa[i], a.path()) == std::filesystem::relative(pb[i], b.path()));
    CHECK(read_file(pa[i]) == read_file(pb[i]));
  }
  CHECK(std::filesystem::exists(a / "comparison.md"));
  CHECK(std::filesystem::exists(a / "plots" / "accuracy_vs_ratio.png"));
  CHECK(std::filesystem::exists(a / "plots" / "run-a_wz_distance.png"));
  CHECK(std::filesystem::exists(a / "plots" / "run-a_l1_hist.png"));
  CHECK(std::filesystem::exists(a / "metrics" / "run-a" / "wz_distance.csv"));
  CHECK(read_file(a / "metrics" / "run-a" / "wz_distance.csv").rfind("stage,step,layer,metric,value\n", 0) == 0);
  const std::string png = read_file(a / "plots" / "accuracy_vs_ratio.png");
  CHECK(png.substr(0, 8) == std::string("\x89PNG\r\n\x1a\n", 8));

  CHECK_THROWS_AS(export_report({}, a.path()), UsageError);
}

TEST_CASE("canvas") {
  Canvas c(10, 5);
  CHECK(c.at(3, 3).r == 255);
  c.set(-1, 2, {0, 0, 0});  // clipped
  c.set(20, 2, {0, 0, 0});
  c.line(0, 0, 9, 4, {1, 2, 3});
  CHECK(c.at(0, 0).g == 2);
  CHECK(c.at(9, 4).b == 3);
  c.rect(2, 1, 3, 2, {9, 9, 9});
  CHECK(c.at(2, 1).r == 9);
  CHECK(c.at(3, 2).r == 9);
  CHECK(c.at(4, 2).r != 9);
  TempDir d;
  c.write_png(d / "c.png");
  CHECK(read_file(d / "c.png").substr(1, 3) == "PNG");
  CHECK_THROWS_AS(c.write_png(d / "missing" / "dir" / "c.png"), IoError);
}
