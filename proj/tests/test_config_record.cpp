// Copyright 2026 The chanprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>

#include "chanprune/config.hpp"
#include "chanprune/errors.hpp"
#include "chanprune/pipeline.hpp"
#include "chanprune/record.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace chanprune;
using namespace testing;

namespace {

bool mentions(const std::exception& e, const std::string& s) {
  return std::string(e.what()).find(s) != std::string::npos;
}

}  // namespace

TEST_CASE("config sections prefix keys") {
  const Config c = Config::parse(
      "seed = 7  # trailing\n"
      "[admm]\n"
      "prune_rate = 0.75\n"
      "\n"
      "[ train ]\n"
      "learning_rate=0.01\n");
  CHECK(c.get_int("seed") == 7);
  CHECK(c.get_double("admm.prune_rate") == 0.75);
  CHECK(c.get_double("train.learning_rate") == 0.01);
  CHECK(c.explicitly_set("admm.prune_rate"));
  CHECK_FALSE(c.explicitly_set("admm.rho"));
  CHECK(c.get("admm.norm") == "l1");
  CHECK_FALSE(c.has("data.root"));
  CHECK(c.get_or("data.root", "x") == "x");
}

TEST_CASE("config errors list every problem") {
  try {
    Config::parse("seed = 1\nbogus = 2\n[admm]\nrhoo = 3\nnot a line\n", "f.cfg");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(mentions(e, "f.cfg:2"));
    CHECK(mentions(e, "'bogus'"));
    CHECK(mentions(e, "'admm.rhoo'"));
    CHECK(mentions(e, "f.cfg:5"));
  }
  CHECK_THROWS_AS(Config::parse("[admm\n"), ConfigError);
  Config c = Config::defaults();
  CHECK_THROWS_AS(c.set("admm.nope", "1"), ConfigError);
  CHECK_THROWS_AS(c.apply_override("admm.rho"), ConfigError);
  CHECK_THROWS_AS(c.get("seed"), ConfigError);
  c.set("admm.rho", "abc");
  CHECK_THROWS_AS(c.get_double("admm.rho"), ConfigError);
  c.set("train.pretrain_epochs", "2.5");
  CHECK_THROWS_AS(c.get_int("train.pretrain_epochs"), ConfigError);
  c.set("iterative.extra_ft", "maybe");
  CHECK_THROWS_AS(c.get_bool("iterative.extra_ft"), ConfigError);
  c.set("admm.prune_rates", "0.5,x");
  CHECK_THROWS_AS(c.get_doubles("admm.prune_rates"), ConfigError);
}

TEST_CASE("overrides and lists") {
  Config c = Config::parse("seed = 1\n");
  c.apply_override("admm.prune_rates=0.5, 0.25");
  c.apply_override("model.filters = 4,8");
  CHECK(c.get_doubles("admm.prune_rates") == std::vector<double>{0.5, 0.25});
  CHECK(c.get_strings("model.filters") == std::vector<std::string>{"4", "8"});
  CHECK(c.explicitly_set("model.filters"));
  c.apply_override("admm.prune_rates=");
  CHECK(c.get_doubles("admm.prune_rates").empty());
}

TEST_CASE("to_text round trips") {
  Config c = Config::parse("seed = 3\nrun_id = r\n[admm]\nrho = 2\n[data]\ndifficulty = 0.25\n");
  const std::string text = c.to_text();
  const Config back = Config::parse(text);
  CHECK(back.values() == c.values());
  CHECK(back.to_text() == text);
  CHECK(text.find("[admm]") != std::string::npos);
  CHECK(text.find("seed = 3") < text.find("[admm]"));
}

TEST_CASE("preset lookup") {
  CHECK(resolve_config_path("toy_ci").filename() == "toy_ci.cfg");
  CHECK(Config::load(resolve_config_path("toy_ci")).get_int("seed") == 1);
  CHECK_THROWS_AS(resolve_config_path("no_such_preset"), IoError);
  CHECK_THROWS_AS(Config::load("/nonexistent/x.cfg"), IoError);
}

TEST_CASE("run config validation") {
  SUBCASE("seed is required") {
    try {
      RunConfig::from_config(Config::parse("[admm]\nrho = 1\n"));
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(mentions(e, "seed"));
    }
  }
  SUBCASE("every violation is reported") {
    try {
      RunConfig::from_config(
          Config::parse("seed = 1\n[admm]\nrho = 0\nprune_rate = 1.0\n[train]\nlearning_rate = -1\n"));
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(mentions(e, "admm.rho"));
      CHECK(mentions(e, "prune rates"));
      CHECK(mentions(e, "train.learning_rate"));
    }
  }
  SUBCASE("iterative keys need the iterative pipeline") {
    const std::string text = "seed = 1\n[iterative]\nfilters_per_round = 3\n";
    CHECK_THROWS_AS(RunConfig::from_config(Config::parse(text)), ConfigError);
    const RunConfig rc = RunConfig::from_config(Config::parse(text + "[pipeline]\nkind = iterative_te\n"));
    CHECK(rc.kind == PipelineKind::kIterativeTaylor);
    CHECK(rc.iterative.filters_per_round == 3);
    CHECK(rc.criterion_label() == "iterative_te");
  }
  SUBCASE("labels and defaults") {
    const RunConfig rc = RunConfig::from_config(Config::parse("seed = 4\n"));
    CHECK(rc.criterion_label() == "admm_l1");
    CHECK(rc.run_id == rc.label() + "_s4");
    CHECK(rc.label().find("toy_synthetic_admm_l1_p") == 0);
    CHECK(rc.test_data.split == "test");
    CHECK(rc.prune_rate(1, 2) == 0.5);
    RunConfig w = RunConfig::from_config(Config::parse("seed = 4\n[admm]\ngranularity = weight\n"));
    CHECK(w.criterion_label() == "admm_weight");
    RunConfig multi = RunConfig::from_config(Config::parse("seed = 4\n[admm]\nprune_rates = 0.5,0.25\n"));
    CHECK(multi.prune_rate(1, 2) == 0.25);
    CHECK_THROWS_AS(multi.prune_rate(0, 3), ConfigError);
  }
}

TEST_CASE("record invariants") {
  RunRecord r;
  r.add("pretrain", 1, "", "loss", 0.5);
  r.add("pretrain", 2, "", "loss", 0.4);
  r.add("pretrain", 1, "conv1", "loss", 0.4);  // separate series per layer
  r.add("admm", 1, "", "loss", 0.3);           // and per stage
  CHECK_THROWS_AS(r.add("pretrain", 2, "", "loss", 0.1), UsageError);
  CHECK_THROWS_AS(r.add("pretrain", 3, "", "loss", std::nan("")), UsageError);
  CHECK_THROWS_AS(r.add("pretrain", 3, "", "loss", std::numeric_limits<double>::infinity()), UsageError);
  CHECK_THROWS_AS(r.add("pretrain", 1, "", "test_accuracy", 1.2), UsageError);
  CHECK_THROWS_AS(r.add("pretrain", 1, "", "test_accuracy", -0.1), UsageError);
  CHECK_THROWS_AS(r.add("pre,train", 1, "", "x", 1.0), UsageError);
  CHECK(r.rows().size() == 4);

  const auto s = r.series("pretrain", "loss");
  REQUIRE(s.size() == 2);
  CHECK(s[1] == std::pair<std::size_t, double>{2, 0.4});
  CHECK(r.last("pretrain", "loss") == 0.4);
  CHECK_FALSE(r.last("finetune", "loss").has_value());
  CHECK(r.metric_names() == std::vector<std::string>{"loss"});
}

TEST_CASE("record csv and run directory round trip") {
  RunRecord r;
  r.run_id = "r1";
  r.criterion_label = "admm";
  r.prune_ratio = 0.5;
  r.final_accuracy = 0.875;
  r.add("admm", 4, "conv1", "wz_distance", 1.0 / 3.0);
  r.add("finetune", 1, "", "test_accuracy", 0.875);
  r.warnings.push_back("w");
  r.stage_seconds["admm"] = 1.5;

  const std::string csv = r.to_csv();
  CHECK(csv.rfind("stage,step,layer,metric,value\n", 0) == 0);
  CHECK(csv.find("admm,4,conv1,wz_distance,0.3333333333\n") != std::string::npos);
  CHECK(r.to_csv("test_accuracy").find("wz_distance") == std::string::npos);
  const RunRecord back = RunRecord::from_csv(csv);
  CHECK(back.to_csv() == csv);
  CHECK_THROWS_AS(RunRecord::from_csv("a,b\n"), IntegrityError);
  CHECK_THROWS_AS(RunRecord::from_csv("stage,step,layer,metric,value\nx,1,,m\n"), IntegrityError);
  CHECK_THROWS_AS(RunRecord::from_csv("stage,step,layer,metric,value\nx,q,,m,1\n"), IntegrityError);

  TempDir dir;
  r.write(dir / "incomplete");
  CHECK_THROWS_AS(RunRecord::read(dir / "incomplete"), IntegrityError);
  CHECK_THROWS_AS(RunRecord::read(dir / "missing"), IoError);

  r.complete = true;
  r.write(dir / "done");
  const RunRecord loaded = RunRecord::read(dir / "done");
  CHECK(loaded.run_id == "r1");
  CHECK(loaded.final_accuracy == 0.875);
  CHECK(loaded.prune_ratio == 0.5);
  CHECK(loaded.warnings == r.warnings);
  CHECK(loaded.to_csv() == csv);
  CHECK(loaded.summary() == r.summary());
}

TEST_CASE("format_value") {
  CHECK(format_value(0.5) == "0.5");
  CHECK(format_value(1.0 / 3.0) == "0.3333333333");
  CHECK(format_value(1e-12) == "1e-12");
  CHECK(format_value(12345678901.0) == "1.23456789e+10");
}
