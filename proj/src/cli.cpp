// Copyright 2026 The chanprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "chanprune/cli.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "chanprune/diagnostics.hpp"
#include "chanprune/errors.hpp"
#include "chanprune/pipeline.hpp"
#include "chanprune/record.hpp"

namespace chanprune::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "ConfigError";
  if (dynamic_cast<const NumericError*>(&e)) return "NumericError";
  if (dynamic_cast<const DimensionError*>(&e)) return "DimensionError";
  if (dynamic_cast<const LookupError*>(&e)) return "LookupError";
  if (dynamic_cast<const StructuralError*>(&e)) return "StructuralError";
  if (dynamic_cast<const SpecError*>(&e)) return "SpecError";
  if (dynamic_cast<const UsageError*>(&e)) return "UsageError";
  if (dynamic_cast<const IntegrityError*>(&e)) return "IntegrityError";
  if (dynamic_cast<const IoError*>(&e)) return "IoError";
  return "Error";
}

json validation_error(const std::string& message) {
  json j = {{"status", "invalid"}, {"type", "ConfigError"}};
  json lines = json::array();
  std::istringstream in(message);
  for (std::string line; std::getline(in, line);) {
    const auto b = line.find_first_not_of(' ');
    if (b != std::string::npos) lines.push_back(line.substr(b));
  }
  if (lines.size() > 1 && lines[0] == "config validation failed:") lines.erase(lines.begin());
  j["errors"] = lines;
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
}

bool occupied(const fs::path& dir) {
  return fs::exists(dir / "config.cfg") || fs::exists(dir / "record.csv") ||
         fs::exists(dir / "summary.json");
}

// Runs an already validated config into out_root/<run_id>.
RunOutcome execute(const Config& config, const RunConfig& rc, const fs::path& out_root,
                   std::ostream& out, std::ostream& err) {
  RunOutcome outcome;
  outcome.run_dir = out_root / rc.run_id;
  if (occupied(outcome.run_dir)) {
    outcome.status = kInvalid;
    outcome.error = validation_error("run id '" + rc.run_id + "' already used in " +
                                     out_root.string());
    err << outcome.error.dump() << "\n";
    outcome.run_dir.clear();
    return outcome;
  }
  std::optional<Pipeline> pipeline;
  try {
    fs::create_directories(outcome.run_dir);
    write_text(outcome.run_dir / "config.cfg", config.to_text());
    pipeline.emplace(rc, outcome.run_dir);
    const PipelineResult result = pipeline->run();
    out << outcome.run_dir.string() << " final_accuracy=" << format_value(result.final_accuracy)
        << "\n";
    return outcome;
  } catch (const std::exception& e) {
    outcome.status = kStageFailure;
    outcome.error = {{"status", "failed"},
                     {"run_id", rc.run_id},
                     {"stage", pipeline ? pipeline->current_stage() : std::string("setup")},
                     {"type", error_kind(e)},
                     {"message", e.what()}};
    if (const auto* ne = dynamic_cast<const NumericError*>(&e)) {
      outcome.error["layer"] = ne->layer_id();
    }
  }
  try {
    if (pipeline) {
      pipeline->record().warnings.push_back("run failed in stage " +
                                            outcome.error["stage"].get<std::string>());
      pipeline->record().write(outcome.run_dir);
    }
    write_text(outcome.run_dir / "error.json", outcome.error.dump(2) + "\n");
  } catch (const std::exception& e) {
    outcome.error["report_failure"] = e.what();
  }
  err << outcome.error.dump() << "\n";
  return outcome;
}

std::string ratio_key(double r) { return format_value(r); }

}  // namespace

Config resolve_config(const Invocation& inv) {
  Config config = inv.config.empty() ? Config::defaults()
                                     : Config::load(resolve_config_path(inv.config));
  std::vector<std::string> problems;
  for (const auto& o : inv.overrides) {
    try {
      config.apply_override(o);
    } catch (const ConfigError& e) {
      problems.emplace_back(e.what());
    }
  }
  if (!problems.empty()) {
    std::string msg = "config validation failed:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
  if (inv.seed) config.set("seed", std::to_string(*inv.seed));
  return config;
}

RunOutcome cmd_run(const Invocation& inv, std::ostream& out, std::ostream& err) {
  Config config;
  RunConfig rc;
  try {
    config = resolve_config(inv);
    rc = RunConfig::from_config(config);
  } catch (const Error& e) {
    RunOutcome outcome;
    outcome.status = kInvalid;
    outcome.error = validation_error(e.what());
    err << outcome.error.dump() << "\n";
    return outcome;
  }
  return execute(config, rc, inv.out, out, err);
}

SweepOutcome cmd_sweep(const Invocation& inv, std::vector<double> ratios,
                       std::vector<std::string> criteria, std::size_t parallel,
                       std::ostream& out, std::ostream& err) {
  SweepOutcome sweep;
  auto fail_validation = [&](const std::string& msg) {
    sweep.status = kInvalid;
    RunOutcome o;
    o.status = kInvalid;
    o.error = validation_error(msg);
    err << o.error.dump() << "\n";
    sweep.runs.push_back(std::move(o));
    return sweep;
  };
  if (ratios.empty() && criteria.empty()) {
    return fail_validation("sweep needs at least one ratio or criterion");
  }
  if (parallel == 0) return fail_validation("--parallel must be at least 1");

  // Deduplicate, keeping first occurrences in order.
  std::vector<double> uniq_ratios;
  std::set<std::string> seen;
  for (double r : ratios) {
    if (!seen.insert(ratio_key(r)).second) {
      sweep.warnings.push_back("duplicate ratio " + ratio_key(r) + " ignored");
    } else {
      uniq_ratios.push_back(r);
    }
  }
  std::vector<std::string> uniq_criteria;
  seen.clear();
  for (const auto& c : criteria) {
    if (!seen.insert(c).second) {
      sweep.warnings.push_back("duplicate criterion " + c + " ignored");
    } else {
      uniq_criteria.push_back(c);
    }
  }
  for (const auto& w : sweep.warnings) err << "warning: " << w << "\n";

  Config base;
  try {
    base = resolve_config(inv);
  } catch (const Error& e) {
    return fail_validation(e.what());
  }
  const std::string base_id = base.get_or("run_id", "");

  // Build and validate every child before starting any.
  struct Child {
    Config config;
    RunConfig rc;
  };
  std::vector<Child> children;
  std::vector<std::string> problems;
  std::set<std::string> ids;
  const std::vector<std::optional<double>> ratio_axis =
      uniq_ratios.empty() ? std::vector<std::optional<double>>{std::nullopt}
                          : std::vector<std::optional<double>>(uniq_ratios.begin(), uniq_ratios.end());
  const std::vector<std::optional<std::string>> crit_axis =
      uniq_criteria.empty()
          ? std::vector<std::optional<std::string>>{std::nullopt}
          : std::vector<std::optional<std::string>>(uniq_criteria.begin(), uniq_criteria.end());
  for (const auto& crit : crit_axis) {
    for (const auto& ratio : ratio_axis) {
      Config c = base;
      try {
        if (ratio) {
          c.set("admm.prune_rates", "");
          c.set("admm.prune_rate", ratio_key(*ratio));
        }
        if (crit) {
          if (*crit == "iterative_te" || *crit == "iterative_te+ft") {
            c.set("pipeline.kind", "iterative_te");
            c.set("prune.criterion", "taylor");
            if (*crit == "iterative_te+ft") c.set("iterative.extra_ft", "true");
          } else {
            c.set("pipeline.kind", "single_shot");
            c.set("prune.criterion", *crit);
          }
        }
        c.set("run_id", "");
        RunConfig rc = RunConfig::from_config(c);
        if (!base_id.empty()) rc.run_id = base_id + "_" + rc.run_id;
        c.set("run_id", rc.run_id);
        if (!ids.insert(rc.run_id).second) {
          problems.push_back("two sweep points map to run id " + rc.run_id);
          continue;
        }
        children.push_back({std::move(c), std::move(rc)});
      } catch (const Error& e) {
        problems.emplace_back(e.what());
      }
    }
  }
  if (!problems.empty()) {
    std::string msg = "config validation failed:";
    for (const auto& p : problems) msg += "\n  " + p;
    return fail_validation(msg);
  }

  sweep.runs.resize(children.size());
  if (parallel == 1) {
    for (std::size_t i = 0; i < children.size(); ++i) {
      sweep.runs[i] = execute(children[i].config, children[i].rc, inv.out, out, err);
    }
  } else {
    out.flush();
    err.flush();
    std::cout.flush();
    std::cerr.flush();
    std::map<pid_t, std::size_t> running;
    std::size_t next = 0;
    auto reap_one = [&] {
      int wstatus = 0;
      const pid_t pid = ::waitpid(-1, &wstatus, 0);
      if (pid <= 0) return;
      const std::size_t i = running.at(pid);
      running.erase(pid);
      RunOutcome& o = sweep.runs[i];
      o.run_dir = inv.out / children[i].rc.run_id;
      o.status = WIFEXITED(wstatus) ? WEXITSTATUS(wstatus) : kStageFailure;
      if (o.status != kOk) {
        std::ifstream f(o.run_dir / "error.json");
        if (f) {
          o.error = json::parse(f, nullptr, false);
        } else {
          o.error = {{"status", "failed"}, {"run_id", children[i].rc.run_id},
                     {"message", "worker process terminated abnormally"}};
        }
        if (o.status == kInvalid) o.run_dir.clear();
      }
    };
    while (next < children.size() || !running.empty()) {
      while (next < children.size() && running.size() < parallel) {
        const pid_t pid = ::fork();
        if (pid == 0) {
          std::ostringstream sink_out;
          const RunOutcome o = execute(children[next].config, children[next].rc, inv.out,
                                       sink_out, std::cerr);
          std::cout << sink_out.str();
          std::cout.flush();
          std::cerr.flush();
          ::_exit(o.status);
        }
        if (pid < 0) {
          sweep.runs[next].status = kStageFailure;
          sweep.runs[next].error = {{"status", "failed"}, {"message", "fork failed"}};
          ++next;
          continue;
        }
        running[pid] = next++;
      }
      if (!running.empty()) reap_one();
    }
  }

  std::vector<RunRecord> records;
  json index = json::array();
  for (const auto& o : sweep.runs) {
    if (o.status != kOk) sweep.status = kStageFailure;
    json entry = {{"run_dir", o.run_dir.string()}, {"status", o.status}};
    if (!o.error.is_null()) entry["error"] = o.error;
    index.push_back(entry);
    if (o.status == kOk) {
      try {
        records.push_back(RunRecord::read(o.run_dir));
      } catch (const Error& e) {
        sweep.status = kStageFailure;
        err << json{{"status", "failed"}, {"run_dir", o.run_dir.string()}, {"message", e.what()}}
                   .dump()
            << "\n";
      }
    }
  }
  try {
    fs::create_directories(inv.out);
    write_text(inv.out / "sweep.json",
               json{{"runs", index}, {"warnings", sweep.warnings}}.dump(2) + "\n");
    if (!records.empty()) sweep.report = export_report(records, inv.out / "report");
  } catch (const Error& e) {
    sweep.status = kStageFailure;
    err << json{{"status", "failed"}, {"stage", "report"}, {"message", e.what()}}.dump() << "\n";
  }
  for (const auto& p : sweep.report) out << p.string() << "\n";
  return sweep;
}

int cmd_report(const std::vector<fs::path>& dirs, const fs::path& out_dir, std::ostream& out,
               std::ostream& err) {
  if (dirs.empty()) {
    err << validation_error("report needs at least one run directory").dump() << "\n";
    return kInvalid;
  }
  std::vector<RunRecord> records;
  json bad = json::array();
  for (const auto& d : dirs) {
    try {
      records.push_back(RunRecord::read(d));
    } catch (const Error& e) {
      bad.push_back({{"run_dir", d.string()}, {"type", error_kind(e)}, {"message", e.what()}});
    }
  }
  if (!bad.empty()) {
    err << json{{"status", "invalid"}, {"incomplete_runs", bad}}.dump() << "\n";
    return kInvalid;
  }
  try {
    for (const auto& p : export_report(records, out_dir)) out << p.string() << "\n";
  } catch (const Error& e) {
    err << json{{"status", "failed"}, {"stage", "report"}, {"type", error_kind(e)},
                {"message", e.what()}}
               .dump()
        << "\n";
    return kStageFailure;
  }
  return kOk;
}

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Channel pruning experiments: ADMM training, filter removal, fine-tuning."};
  app.name("chanprune");
  app.require_subcommand(1);

  Invocation inv;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "runs";
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", inv.config, "config file or preset name");
    sub->add_option("--set", inv.overrides, "override KEY=VALUE (repeatable)")->take_all();
    sub->add_option("--seed", seed, "override the config seed");
  };

  CLI::App* run = app.add_subcommand("run", "run one configured pipeline");
  add_common(run);
  run->add_option("--out", out_dir, "output directory")->capture_default_str();

  std::vector<double> ratios;
  std::vector<std::string> criteria;
  std::size_t parallel = 1;
  CLI::App* sweep = app.add_subcommand("sweep", "run a grid of ratios and criteria");
  add_common(sweep);
  sweep->add_option("--out", out_dir, "output directory")->capture_default_str();
  sweep->add_option("--ratios", ratios, "prune ratios")->delimiter(',');
  sweep->add_option("--criteria", criteria,
                    "criteria (min_weight, mean_activation, taylor, random, admm_l1, iterative_te)")
      ->delimiter(',');
  sweep->add_option("--parallel", parallel, "worker processes")->capture_default_str();

  std::vector<std::string> report_dirs;
  std::string report_out = "report";
  CLI::App* report = app.add_subcommand("report", "combine completed runs into a report");
  report->add_option("dirs", report_dirs, "run directories")->required();
  report->add_option("--out", report_out, "output directory")->capture_default_str();

  CLI::App* validate = app.add_subcommand("validate-config", "check a config and print it resolved");
  add_common(validate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInvalid;
  }
  inv.seed = seed;
  inv.out = out_dir;

  if (*run) return cmd_run(inv, out, err).status;
  if (*sweep) return cmd_sweep(inv, ratios, criteria, parallel, out, err).status;
  if (*report) {
    std::vector<fs::path> dirs(report_dirs.begin(), report_dirs.end());
    return cmd_report(dirs, report_out, out, err);
  }
  try {
    const Config config = resolve_config(inv);
    const RunConfig rc = RunConfig::from_config(config);
    out << config.to_text();
    out << "# run_id = " << rc.run_id << "\n";
    return kOk;
  } catch (const Error& e) {
    err << validation_error(e.what()).dump() << "\n";
    return kInvalid;
  }
}

}  // namespace chanprune::cli
