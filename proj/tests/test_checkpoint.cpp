// Copyright 2026 The chanprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "chanprune/admm.hpp"
#include "chanprune/errors.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace chanprune;
using namespace testing;

namespace {

Dataset small_set(std::uint64_t seed, std::size_t n, const Network& net) {
  Rng rng(seed);
  Dataset ds;
  ds.channels = net.in_channels();
  ds.height = net.in_height();
  ds.width = net.in_width();
  ds.classes = net.classes();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < ds.sample_size(); ++p) {
      ds.images.push_back(static_cast<float>(rng.uniform(-1, 1)));
    }
    ds.labels.push_back(static_cast<int>(i % ds.classes));
  }
  return ds;
}

}  // namespace

TEST_CASE("lenet checkpoint round trip preserves evaluate") {
  TempDir dir;
  const Network net = build_model(lenet5_spec(), 17);
  CheckpointMetadata meta;
  meta.stage = "pretrain";
  meta.seed = 17;
  meta.epoch = 3;
  meta.extra["note"] = "a=b c";
  save_checkpoint(net, dir / "m.ckpt", meta, {{"stats", Tensor({2, 2}, 0.5f)}});

  const Checkpoint ck = load_checkpoint(dir / "m.ckpt");
  CHECK(ck.model == net);
  CHECK(ck.model.architecture() == net.architecture());
  CHECK(ck.metadata.architecture == "lenet5");
  CHECK(ck.metadata.stage == "pretrain");
  CHECK(ck.metadata.seed == 17);
  CHECK(ck.metadata.epoch == 3);
  CHECK(ck.metadata.extra.at("note") == "a=b c");
  CHECK(ck.extra_tensors.at("stats") == Tensor({2, 2}, 0.5f));

  const Dataset ds = small_set(1, 40, net);
  CHECK(ck.model.evaluate(ds, 16) == net.evaluate(ds, 16));
}

TEST_CASE("pruned architectures survive the round trip") {
  TempDir dir;
  ArchitectureSpec spec = toy_spec({5, 3});
  const Network net = build_model(spec, 2);
  save_checkpoint(net, dir / "p.ckpt", {});
  CHECK(load_checkpoint(dir / "p.ckpt").model == net);
}

TEST_CASE("architecture mismatch is structural") {
  TempDir dir;
  save_checkpoint(build_model(toy_spec(), 1), dir / "t.ckpt", {});
  CHECK_NOTHROW(load_checkpoint(dir / "t.ckpt", "toy"));
  CHECK_THROWS_AS(load_checkpoint(dir / "t.ckpt", "lenet5"), StructuralError);
}

TEST_CASE("corrupt and missing archives") {
  TempDir dir;
  save_checkpoint(build_model(toy_spec(), 1), dir / "c.ckpt", {});
  const std::string good = read_file(dir / "c.ckpt");

  SUBCASE("flipped payload byte") {
    std::string bad = good;
    bad[bad.size() / 2] ^= 0x40;
    write_file(dir / "bad.ckpt", bad);
    CHECK_THROWS_AS(load_checkpoint(dir / "bad.ckpt"), IntegrityError);
  }
  SUBCASE("truncated") {
    write_file(dir / "short.ckpt", good.substr(0, good.size() - 9));
    CHECK_THROWS_AS(load_checkpoint(dir / "short.ckpt"), IntegrityError);
  }
  SUBCASE("wrong magic") {
    std::string bad = good;
    bad[0] = 'X';
    write_file(dir / "magic.ckpt", bad);
    CHECK_THROWS_AS(load_checkpoint(dir / "magic.ckpt"), IntegrityError);
  }
  SUBCASE("missing") { CHECK_THROWS_AS(load_checkpoint(dir / "none.ckpt"), IoError); }
}

TEST_CASE("manifest is readable text") {
  TempDir dir;
  CheckpointMetadata meta;
  meta.stage = "admm";
  meta.seed = 9;
  save_checkpoint(build_model(toy_spec(), 1), dir / "m.ckpt", meta);
  const std::string bytes = read_file(dir / "m.ckpt");
  CHECK(bytes.rfind("CHPRCKPT", 0) == 0);
  CHECK(bytes.find("architecture=toy") != std::string::npos);
  CHECK(bytes.find("stage=admm") != std::string::npos);
  CHECK(bytes.find("seed=9") != std::string::npos);
  CHECK(bytes.find("format-version=1") != std::string::npos);
}

TEST_CASE("resuming ADMM from a checkpoint continues the same trajectory") {
  TempDir dir;
  Rng rng(77);
  Network net = build_model(toy_spec(), 5);
  std::vector<LayerSparsitySpec> specs;
  for (const auto& l : net.list_conv_layers()) {
    specs.push_back(LayerSparsitySpec::make(l.layer_id, l.n_filters, 0.5, 1e-3, 0.1));
  }
  AdmmState state = init_state(net, specs);
  const SgdOptions opt{0.05f, 5e-4f};
  std::vector<Batch> batches;
  for (int i = 0; i < 6; ++i) batches.push_back(random_batch_for(rng, net, 8));

  auto admm_step = [&](Network& m, AdmmState& s, const Batch& b) {
    GradientMap extra;
    for (std::size_t i = 0; i < s.specs.size(); ++i) {
      const auto& id = s.specs[i].layer_id;
      extra.emplace(id, admm_regularizer(m.get_weights(id), s.z[i], s.u[i], s.specs[i].penalty).grad);
    }
    return m.train_step(b, opt, extra);
  };
  for (int i = 0; i < 3; ++i) admm_step(net, state, batches[i]);
  for (std::size_t i = 0; i < state.specs.size(); ++i) {
    const auto& id = state.specs[i].layer_id;
    FilterTensor z = step_z(net.get_weights(id), state.u[i], state.specs[i], state.norm);
    state.u[i] = step_u(state.u[i], net.get_weights(id), z);
    state.z[i] = std::move(z);
  }
  ++state.iteration;

  CheckpointMetadata meta;
  meta.stage = "admm";
  meta.extra = state.to_metadata();
  save_checkpoint(net, dir / "admm.ckpt", meta, state.to_tensors());

  const Checkpoint ck = load_checkpoint(dir / "admm.ckpt");
  Network resumed = ck.model;
  AdmmState resumed_state = AdmmState::from_checkpoint(ck);
  CHECK(resumed_state.iteration == state.iteration);
  CHECK(resumed_state.norm == state.norm);
  for (std::size_t i = 0; i < state.z.size(); ++i) {
    CHECK(resumed_state.z[i].same_values(state.z[i]));
    CHECK(resumed_state.u[i].same_values(state.u[i]));
    CHECK(resumed_state.specs[i].keep_count == state.specs[i].keep_count);
    CHECK(resumed_state.specs[i].penalty == state.specs[i].penalty);
  }

  for (int i = 3; i < 6; ++i) {
    const double a = admm_step(net, state, batches[i]);
    const double b = admm_step(resumed, resumed_state, batches[i]);
    CHECK(a == b);
  }
  CHECK(net == resumed);
}
