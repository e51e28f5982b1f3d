// Copyright 2026 The chanprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <sys/wait.h>

#include <cstdlib>
#include <sstream>

#include <nlohmann/json.hpp>

#include "chanprune/cli.hpp"
#include "chanprune/record.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace chanprune;
using namespace testing;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kFast = {
    "data.n_per_class=32",    "data.test_n_per_class=32", "data.batch_size=32",
    "train.pretrain_epochs=2", "train.finetune_epochs=1",  "admm.max_epochs=2",
    "prune.stat_batches=1",    "prune.stat_batch_size=16"};

struct Result {
  int status;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "chanprune");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int rc = cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {rc, out.str(), err.str()};
}

std::vector<std::string> fast_args(std::vector<std::string> head, const fs::path& out,
                                   std::vector<std::string> extra = {}) {
  head.insert(head.end(), {"--config", "toy_ci", "--out", out.string()});
  for (const auto& s : kFast) head.insert(head.end(), {"--set", s});
  for (const auto& s : extra) head.insert(head.end(), {"--set", s});
  return head;
}

nlohmann::json last_json_line(const std::string& text) {
  std::istringstream in(text);
  std::string line, last;
  while (std::getline(in, line)) {
    if (!line.empty() && line.front() == '{') last = line;
  }
  return nlohmann::json::parse(last);
}

}  // namespace

TEST_CASE("invalid invocations exit 2 with a JSON error") {
  TempDir dir;
  SUBCASE("unknown override key") {
    const Result r = invoke(fast_args({"run"}, dir.path(), {"admm.rhoo=1"}));
    CHECK(r.status == cli::kInvalid);
    const auto j = last_json_line(r.err);
    CHECK(j["status"] == "invalid");
    CHECK(j.dump().find("admm.rhoo") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "runs"));
  }
  SUBCASE("missing seed") {
    const Result r = invoke({"validate-config", "--set", "admm.rho=1"});
    CHECK(r.status == cli::kInvalid);
    CHECK(r.err.find("seed") != std::string::npos);
  }
  SUBCASE("bad value") {
    const Result r = invoke(fast_args({"run"}, dir.path(), {"admm.prune_rate=1.5"}));
    CHECK(r.status == cli::kInvalid);
    CHECK(fs::is_empty(dir.path()));
  }
  SUBCASE("unknown subcommand") { CHECK(invoke({"frobnicate"}).status == cli::kInvalid); }
}

TEST_CASE("validate-config prints the resolved config") {
  const Result r = invoke({"validate-config", "--config", "toy_ci", "--seed", "9", "--set", "admm.rho=2"});
  REQUIRE(r.status == cli::kOk);
  CHECK(r.out.find("seed = 9") != std::string::npos);
  CHECK(r.out.find("rho = 2") != std::string::npos);
  CHECK(r.out.find("# run_id = toy_synthetic_admm_l1_p50_s9") != std::string::npos);
}

TEST_CASE("run writes a run directory and refuses to reuse it") {
  TempDir dir;
  const auto args = fast_args({"run", "--seed", "2"}, dir.path());
  const Result r = invoke(args);
  REQUIRE(r.status == cli::kOk);
  const fs::path run = dir / "toy_synthetic_admm_l1_p50_s2";
  CHECK(fs::exists(run / "config.cfg"));
  CHECK(fs::exists(run / "record.csv"));
  CHECK(RunRecord::read(run).complete);
  CHECK(read_file(run / "config.cfg").find("seed = 2") != std::string::npos);

  const std::string before = read_file(run / "record.csv");
  const Result again = invoke(args);
  CHECK(again.status == cli::kInvalid);
  CHECK(again.err.find("already used") != std::string::npos);
  CHECK(read_file(run / "record.csv") == before);

  // Same config in a fresh directory reproduces the record byte for byte.
  TempDir other;
  REQUIRE(invoke(fast_args({"run", "--seed", "2"}, other.path())).status == cli::kOk);
  CHECK(read_file(other / "toy_synthetic_admm_l1_p50_s2" / "record.csv") == before);
}

TEST_CASE("stage failure exits 1 and names the stage") {
  TempDir dir;
  const Result r = invoke(fast_args({"run"}, dir.path(), {"train.learning_rate=1e12", "run_id=boom"}));
  CHECK(r.status == cli::kStageFailure);
  const auto j = nlohmann::json::parse(read_file(dir / "boom" / "error.json"));
  CHECK(j["stage"] == "pretrain");
  CHECK(j["type"] == "NumericError");
  CHECK(last_json_line(r.err)["stage"] == "pretrain");
  CHECK(fs::exists(dir / "boom" / "record.csv"));
  CHECK(fs::exists(dir / "boom" / "config.cfg"));

  // The report refuses the failed run and names it.
  const Result rep = invoke({"report", (dir / "boom").string(), "--out", (dir / "rep").string()});
  CHECK(rep.status == cli::kInvalid);
  CHECK(rep.err.find("boom") != std::string::npos);
}

TEST_CASE("sweep") {
  TempDir seq, par;
  const auto extra = std::vector<std::string>{"--ratios", "0.5,0.25,0.5", "--criteria", "min_weight,random"};
  auto args = fast_args({"sweep"}, seq.path());
  args.insert(args.end(), extra.begin(), extra.end());
  const Result r = invoke(args);
  REQUIRE(r.status == cli::kOk);
  CHECK(r.err.find("duplicate ratio 0.5 ignored") != std::string::npos);
  const auto index = nlohmann::json::parse(read_file(seq / "sweep.json"));
  CHECK(index["runs"].size() == 4);
  CHECK(fs::exists(seq / "report" / "comparison.md"));
  const std::string md = read_file(seq / "report" / "comparison.md");
  CHECK(md.find("min_weight") != std::string::npos);
  CHECK(md.find("| 25% |") != std::string::npos);

  auto pargs = fast_args({"sweep", "--parallel", "3"}, par.path());
  pargs.insert(pargs.end(), extra.begin(), extra.end());
  REQUIRE(invoke(pargs).status == cli::kOk);
  for (const auto& entry : fs::directory_iterator(seq.path())) {
    if (!fs::exists(entry.path() / "record.csv")) continue;
    const fs::path twin = par / entry.path().filename();
    REQUIRE(fs::exists(twin / "record.csv"));
    CHECK(read_file(entry.path() / "record.csv") == read_file(twin / "record.csv"));
  }
  CHECK(read_file(seq / "report" / "comparison.csv") == read_file(par / "report" / "comparison.csv"));

  TempDir single;
  auto sargs = fast_args({"sweep"}, single.path());
  sargs.insert(sargs.end(), {"--criteria", "iterative_te"});
  REQUIRE(invoke(sargs).status == cli::kOk);
  CHECK(nlohmann::json::parse(read_file(single / "sweep.json"))["runs"].size() == 1);

  TempDir none;
  CHECK(invoke(fast_args({"sweep"}, none.path())).status == cli::kInvalid);
}

TEST_CASE("report over completed runs is deterministic") {
  TempDir dir;
  REQUIRE(invoke(fast_args({"run"}, dir.path(), {"run_id=a"})).status == cli::kOk);
  REQUIRE(invoke(fast_args({"run"}, dir.path(), {"run_id=b", "prune.criterion=taylor"})).status == cli::kOk);
  const std::vector<std::string> dirs = {(dir / "a").string(), (dir / "b").string()};
  const Result r1 = invoke({"report", dirs[0], dirs[1], "--out", (dir / "r1").string()});
  const Result r2 = invoke({"report", dirs[0], dirs[1], "--out", (dir / "r2").string()});
  REQUIRE(r1.status == cli::kOk);
  REQUIRE(r2.status == cli::kOk);
  for (const auto& e : fs::recursive_directory_iterator(dir / "r1")) {
    if (!e.is_regular_file()) continue;
    CHECK(read_file(e.path()) == read_file(dir / "r2" / fs::relative(e.path(), dir / "r1")));
  }
  CHECK(read_file(dir / "r1" / "comparison.md").find("taylor") != std::string::npos);

  fs::create_directories(dir / "empty");
  const Result bad = invoke({"report", dirs[0], (dir / "empty").string(), "--out", (dir / "r3").string()});
  CHECK(bad.status == cli::kInvalid);
  CHECK(bad.err.find("empty") != std::string::npos);
}

TEST_CASE("the installed binary reports exit statuses") {
  const std::string bin = CHANPRUNE_CLI_PATH;
  auto status = [](const std::string& cmd) {
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  CHECK(status(bin + " validate-config --config toy_ci > /dev/null") == 0);
  CHECK(status(bin + " validate-config --set nope=1 > /dev/null 2>&1") == 2);
  CHECK(status(bin + " --help > /dev/null") == 0);
}
