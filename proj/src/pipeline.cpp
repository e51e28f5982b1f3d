// Copyright 2026 The chanprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "chanprune/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <cmath>
#include <numeric>
#include <sstream>
#include <tuple>

#include "chanprune/diagnostics.hpp"
#include "chanprune/errors.hpp"
#include "chanprune/models.hpp"
#include "chanprune/rng.hpp"
#include "chanprune/surgery.hpp"

namespace chanprune {

namespace {

std::string ratio_label(double r) {
  std::ostringstream s;
  s << r * 100.0;
  return s.str();
}

class StageTimer {
 public:
  StageTimer(RunRecord& record, std::string& current, std::string stage)
      : record_(record), stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {
    current = stage_;
  }
  ~StageTimer() {
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start_;
    record_.stage_seconds[stage_] += dt.count();
  }

 private:
  RunRecord& record_;
  std::string stage_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace

// --- RunConfig -------------------------------------------------------------

RunConfig RunConfig::from_config(const Config& c) {
  RunConfig rc;
  std::vector<std::string> problems;
  auto guard = [&](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      problems.emplace_back(e.what());
    }
  };

  guard([&] {
    if (!c.has("seed")) throw ConfigError("seed is required (set it in the config or pass --seed)");
    const long long s = c.get_int("seed");
    if (s < 0) throw ConfigError("seed must be non-negative");
    rc.seed = static_cast<std::uint64_t>(s);
  });
  guard([&] { rc.architecture = c.get("model.architecture"); });
  guard([&] {
    for (double f : c.get_doubles("model.filters")) {
      if (f < 1 || f != std::floor(f)) throw ConfigError("model.filters entries must be positive integers");
      rc.filters.push_back(static_cast<std::size_t>(f));
    }
    architecture_by_name(rc.architecture, rc.filters);
  });

  guard([&] {
    DatasetHandle h;
    h.name = c.get("data.dataset");
    if (h.name != "mnist" && h.name != "cifar10" && h.name != "synthetic") {
      throw ConfigError("data.dataset must be mnist, cifar10 or synthetic");
    }
    h.subset_fraction = c.get_double("data.subset");
    if (!(h.subset_fraction > 0.0 && h.subset_fraction <= 1.0)) {
      throw ConfigError("data.subset must lie in (0, 1]");
    }
    h.seed = rc.seed;
    h.root = c.has("data.root") ? std::filesystem::path(c.get("data.root")) : default_data_root();
    h.n_per_class = static_cast<std::size_t>(c.get_int("data.n_per_class"));
    h.difficulty = c.get_double("data.difficulty");
    h.image_size = static_cast<std::size_t>(c.get_int("data.image_size"));
    rc.train_data = h;
    rc.test_data = h;
    rc.test_data.split = "test";
    rc.test_data.subset_fraction = 1.0;
    rc.test_data.n_per_class = static_cast<std::size_t>(c.get_int("data.test_n_per_class"));
  });
  guard([&] {
    const long long b = c.get_int("data.batch_size");
    if (b < 1) throw ConfigError("data.batch_size must be >= 1");
    rc.batch_size = static_cast<std::size_t>(b);
  });

  guard([&] {
    rc.learning_rate = static_cast<float>(c.get_double("train.learning_rate"));
    if (!(rc.learning_rate > 0.0f)) throw ConfigError("train.learning_rate must be > 0");
  });
  guard([&] {
    rc.weight_decay = static_cast<float>(c.get_double("train.weight_decay"));
    if (rc.weight_decay < 0.0f) throw ConfigError("train.weight_decay must be >= 0");
  });
  auto count = [&](const std::string& key, std::size_t& out, long long min) {
    guard([&] {
      const long long v = c.get_int(key);
      if (v < min) throw ConfigError(key + " must be >= " + std::to_string(min));
      out = static_cast<std::size_t>(v);
    });
  };
  count("train.pretrain_epochs", rc.pretrain_epochs, 0);
  count("train.finetune_epochs", rc.finetune_epochs, 0);
  count("train.log_interval", rc.log_interval, 1);
  count("train.eval_batch_size", rc.eval_batch_size, 1);
  rc.pretrained_checkpoint = c.get_or("train.pretrained_checkpoint", "");

  guard([&] {
    rc.admm.prune_rates = c.get_doubles("admm.prune_rates");
    if (rc.admm.prune_rates.empty()) rc.admm.prune_rates = {c.get_double("admm.prune_rate")};
    for (double p : rc.admm.prune_rates) {
      if (!(p >= 0.0 && p < 1.0)) throw ConfigError("prune rates must lie in [0, 1)");
    }
  });
  guard([&] {
    rc.admm.rho = c.get_double("admm.rho");
    if (!(rc.admm.rho > 0.0) || !std::isfinite(rc.admm.rho)) throw ConfigError("admm.rho must be > 0");
  });
  guard([&] {
    rc.admm.epsilon_scale = c.get_double("admm.epsilon_scale");
    if (!(rc.admm.epsilon_scale > 0.0)) throw ConfigError("admm.epsilon_scale must be > 0");
    rc.admm.epsilon = c.get_doubles("admm.epsilon");
    for (double e : rc.admm.epsilon) {
      if (!(e > 0.0)) throw ConfigError("admm.epsilon entries must be > 0");
    }
  });
  guard([&] { rc.admm.norm = norm_from_string(c.get("admm.norm")); });
  guard([&] { rc.admm.granularity = granularity_from_string(c.get("admm.granularity")); });
  guard([&] { rc.admm.exit_rule = exit_rule_from_string(c.get("admm.exit_rule")); });
  count("admm.update_interval", rc.admm.update_interval, 0);
  count("admm.max_epochs", rc.admm.max_epochs, 1);
  count("admm.patience", rc.admm.patience, 1);
  guard([&] {
    const std::string& s = c.get("admm.start");
    if (s != "pretrained" && s != "scratch") throw ConfigError("admm.start must be pretrained or scratch");
    rc.admm.from_scratch = s == "scratch";
  });

  guard([&] { rc.criterion = criterion_from_string(c.get("prune.criterion")); });
  count("prune.stat_batches", rc.stat_batches, 1);
  count("prune.stat_batch_size", rc.stat_batch_size, 1);

  guard([&] {
    const std::string& k = c.get("pipeline.kind");
    if (k == "single_shot") {
      rc.kind = PipelineKind::kSingleShot;
    } else if (k == "iterative_te") {
      rc.kind = PipelineKind::kIterativeTaylor;
    } else {
      throw ConfigError("pipeline.kind must be single_shot or iterative_te");
    }
  });
  count("iterative.filters_per_round", rc.iterative.filters_per_round, 1);
  count("iterative.updates_per_round", rc.iterative.updates_per_round, 0);
  count("iterative.batch_size", rc.iterative.batch_size, 1);
  count("iterative.extra_ft_epochs", rc.iterative.extra_ft_epochs, 0);
  guard([&] { rc.iterative.extra_ft = c.get_bool("iterative.extra_ft"); });
  if (rc.kind != PipelineKind::kIterativeTaylor) {
    for (const auto& [k, v] : c.values()) {
      if (k.rfind("iterative.", 0) == 0 && c.explicitly_set(k)) {
        problems.push_back(k + " is only valid with pipeline.kind = iterative_te");
      }
    }
  }

  if (!problems.empty()) {
    std::string msg = "config validation failed:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
  rc.run_id = c.get_or("run_id", "");
  if (rc.run_id.empty()) rc.run_id = rc.label() + "_s" + std::to_string(rc.seed);
  return rc;
}

double RunConfig::prune_rate(std::size_t layer_index, std::size_t layer_count) const {
  if (admm.prune_rates.size() == 1) return admm.prune_rates.front();
  if (admm.prune_rates.size() != layer_count) {
    throw ConfigError("admm.prune_rates lists " + std::to_string(admm.prune_rates.size()) +
                      " rates for " + std::to_string(layer_count) + " conv layers");
  }
  return admm.prune_rates.at(layer_index);
}

std::string RunConfig::criterion_label() const {
  if (kind == PipelineKind::kIterativeTaylor) {
    return iterative.extra_ft ? "iterative_te+ft" : "iterative_te";
  }
  if (criterion == Criterion::kAdmmL1 && admm.granularity == Granularity::kWeight) {
    return "admm_weight";
  }
  return to_string(criterion);
}

std::string RunConfig::label() const {
  const std::string crit = criterion_label();
  std::string rates;
  for (std::size_t i = 0; i < admm.prune_rates.size(); ++i) {
    rates += (i ? "-" : "") + ratio_label(admm.prune_rates[i]);
  }
  return architecture + "_" + train_data.name + "_" + crit + "_p" + rates;
}

// --- Pipeline --------------------------------------------------------------

Pipeline::Pipeline(RunConfig config, std::optional<std::filesystem::path> run_dir)
    : Pipeline(config, load_dataset(config.train_data), load_dataset(config.test_data),
               std::move(run_dir)) {}

Pipeline::Pipeline(RunConfig config, Dataset train, Dataset test,
                   std::optional<std::filesystem::path> run_dir)
    : config_(std::move(config)),
      train_(std::move(train)),
      test_(std::move(test)),
      run_dir_(std::move(run_dir)) {
  record_.run_id = config_.run_id;
  record_.criterion_label = config_.criterion_label();
  if (config_.admm.prune_rates.size() == 1) {
    record_.details["nominal_ratio"] = config_.admm.prune_rates.front();
  }
  if (train_.count() == 0 || test_.count() == 0) throw UsageError("train and test sets must be nonempty");
}

Network Pipeline::initial_model() const {
  ArchitectureSpec spec = config_.architecture == "toy"
                              ? toy_spec(config_.filters.empty() ? std::vector<std::size_t>{8, 16}
                                                                 : config_.filters,
                                         train_.height, train_.classes)
                              : architecture_by_name(config_.architecture, config_.filters);
  if (spec.in_channels != train_.channels || spec.in_height != train_.height ||
      spec.in_width != train_.width || spec.classes() != train_.classes) {
    throw ConfigError("architecture " + spec.name + " does not fit dataset " + train_.name);
  }
  return build_model(spec, config_.seed);
}

double Pipeline::run_epoch(Network& model, std::size_t epoch_index, const std::string& stage,
                           std::size_t& step,
                           const std::function<GradientMap(const Network&)>& extra,
                           const std::function<bool(const Network&, std::size_t)>& after_step) {
  const BatchSchedule schedule(train_.count(), config_.batch_size, config_.seed);
  const SgdOptions sgd{config_.learning_rate, config_.weight_decay};
  double total = 0.0;
  std::size_t batches = 0;
  for (const auto& indices : schedule.epoch(epoch_index)) {
    const Batch batch = train_.gather(indices);
    const double loss = extra ? model.train_step(batch, sgd, extra(model))
                              : model.train_step(batch, sgd);
    ++step;
    ++total_steps_;
    ++batches;
    total += loss;
    if (step % config_.log_interval == 0) record_.add(stage, step, "", "loss", loss);
    if (after_step && after_step(model, step)) break;
  }
  return total / static_cast<double>(std::max<std::size_t>(batches, 1));
}

void Pipeline::record_epoch(const Network& model, const std::string& stage, std::size_t epoch,
                            double mean_loss) {
  record_.add(stage, epoch, "", "train_loss", mean_loss);
  record_.add(stage, epoch, "", "test_accuracy", model.evaluate(test_, config_.eval_batch_size));
}

void Pipeline::record_l1_snapshot(const Network& model, const std::string& stage) {
  for (const auto& [layer, norms] : l1_snapshot(model)) {
    for (std::size_t j = 0; j < norms.size(); ++j) {
      record_.add(stage, j, layer, "filter_l1", norms[j]);
    }
  }
}

void Pipeline::checkpoint(const Network& model, const std::string& stage, std::int64_t epoch,
                          const AdmmState* state) const {
  if (!run_dir_) return;
  const auto dir = *run_dir_ / "checkpoints";
  std::filesystem::create_directories(dir);
  CheckpointMetadata meta;
  meta.stage = stage;
  meta.seed = config_.seed;
  meta.epoch = epoch;
  std::map<std::string, Tensor> extra;
  if (state) {
    meta.extra = state->to_metadata();
    extra = state->to_tensors();
  }
  save_checkpoint(model, dir / (stage + ".ckpt"), meta, extra);
}

Network Pipeline::pretrain() {
  StageTimer timer(record_, current_stage_, "pretrain");
  Network model = initial_model();
  std::size_t step = 0;
  for (std::size_t e = 0; e < config_.pretrain_epochs; ++e) {
    const double loss = run_epoch(model, e, "pretrain", step, {}, {});
    record_epoch(model, "pretrain", e + 1, loss);
  }
  record_l1_snapshot(model, "pretrain");
  checkpoint(model, "pretrain", static_cast<std::int64_t>(config_.pretrain_epochs));
  return model;
}

Network Pipeline::starting_model() {
  if (!config_.pretrained_checkpoint.empty()) {
    Checkpoint ck = load_checkpoint(config_.pretrained_checkpoint, config_.architecture);
    return std::move(ck.model);
  }
  const bool scratch = config_.kind == PipelineKind::kSingleShot &&
                       config_.criterion == Criterion::kAdmmL1 && config_.admm.from_scratch;
  return scratch ? initial_model() : pretrain();
}

AdmmOutcome Pipeline::train_admm(Network& model) {
  StageTimer timer(record_, current_stage_, "admm");
  const auto layers = model.list_conv_layers();
  const AdmmSettings& cfg = config_.admm;
  if (!cfg.epsilon.empty() && cfg.epsilon.size() != 1 && cfg.epsilon.size() != layers.size()) {
    throw ConfigError("admm.epsilon must list one value or one per conv layer");
  }
  std::vector<LayerSparsitySpec> specs;
  std::vector<bool> vacuous;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const FilterTensor& w = model.conv(layers[i].layer_id).weight;
    const double eps = cfg.epsilon.empty()    ? cfg.epsilon_scale * static_cast<double>(w.size())
                       : cfg.epsilon.size() == 1 ? cfg.epsilon.front()
                                                 : cfg.epsilon[i];
    const std::size_t units = prunable_units(w, cfg.granularity);
    specs.push_back(LayerSparsitySpec::make(layers[i].layer_id, units,
                                            config_.prune_rate(i, layers.size()), eps, cfg.rho,
                                            cfg.granularity));
    vacuous.push_back(specs.back().vacuous(units));
  }

  AdmmOutcome out;
  out.state = init_state(model, specs, cfg.norm);
  AdmmState& state = out.state;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& w = model.conv(layers[i].layer_id).weight;
    record_.add("admm", 0, layers[i].layer_id, "wz_distance",
                std::sqrt(squared_distance(w.values(), state.z[i].values())));
  }

  const BatchSchedule schedule(train_.count(), config_.batch_size, config_.seed);
  const std::size_t interval =
      cfg.update_interval == 0 ? schedule.batches_per_epoch() : cfg.update_interval;
  std::size_t inner = 0;
  bool done = false;
  std::vector<double> best_wz(layers.size(), std::numeric_limits<double>::infinity());
  std::vector<std::size_t> stalled(layers.size(), 0);

  auto extra = [&](const Network& m) {
    GradientMap g;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (vacuous[i]) continue;  // Z tracks W exactly; the term is zero
      const auto& w = m.conv(layers[i].layer_id).weight;
      g.emplace(layers[i].layer_id, admm_regularizer(w, state.z[i], state.u[i], cfg.rho).grad);
    }
    return g;
  };

  auto outer_update = [&](const Network& m, std::size_t) {
    if (++inner < interval) return false;
    inner = 0;
    bool all = true;
    ++state.iteration;
    const std::size_t k = state.iteration;
    double penalty = 0.0;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const std::string& id = layers[i].layer_id;
      const FilterTensor& w = m.conv(id).weight;
      const FilterTensor z_prev = state.z[i];
      state.z[i] = vacuous[i] ? w : step_z(w, state.u[i], specs[i], cfg.norm);
      state.u[i] = step_u(state.u[i], w, state.z[i]);
      all = converged(w, state.z[i], z_prev, specs[i].tolerance, cfg.exit_rule) && all;
      const double wz = std::sqrt(squared_distance(w.values(), state.z[i].values()));
      record_.add("admm", k, id, "wz_distance", wz);
      record_.add("admm", k, id, "z_change",
                  std::sqrt(squared_distance(state.z[i].values(), z_prev.values())));
      penalty += admm_regularizer(w, state.z[i], state.u[i], cfg.rho).penalty;
      if (wz < best_wz[i]) {
        best_wz[i] = wz;
        stalled[i] = 0;
      } else if (++stalled[i] == cfg.patience) {
        record_.warnings.push_back("admm: ||W-Z|| of " + id + " has not decreased for " +
                                   std::to_string(cfg.patience) + " iterations (k=" +
                                   std::to_string(k) + ")");
      }
    }
    record_.add("admm", k, "", "admm_penalty", penalty);
    done = all;
    return done;
  };

  std::size_t step = 0;
  std::size_t epoch = 0;
  for (; epoch < cfg.max_epochs && !done; ++epoch) {
    const double loss = run_epoch(model, epoch, "admm", step, extra, outer_update);
    record_epoch(model, "admm", epoch + 1, loss);
  }
  out.converged = done;
  out.epochs_run = epoch;
  if (!done) {
    record_.warnings.push_back("admm: not converged after " + std::to_string(epoch) +
                               " epochs (k=" + std::to_string(state.iteration) + ")");
  }

  const std::size_t k_exit = state.iteration + 1;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const FilterTensor& w = model.conv(layers[i].layer_id).weight;
    const FilterTensor& z = state.z[i];
    double mass = 0.0;
    if (cfg.granularity == Granularity::kFilter) {
      for (std::size_t j = 0; j < z.n_out(); ++j) {
        const auto zf = z.filter(j);
        if (std::all_of(zf.begin(), zf.end(), [](float v) { return v == 0.0f; })) {
          mass += squared_norm(w.filter(j));
        }
      }
    } else {
      for (std::size_t e = 0; e < z.size(); ++e) {
        if (z[e] == 0.0f) mass += static_cast<double>(w[e]) * w[e];
      }
    }
    out.prune_set_mass.push_back(mass);
    out.tolerances.push_back(specs[i].tolerance);
    record_.add("admm", k_exit, layers[i].layer_id, "prune_set_mass", mass);
    record_.add("admm", k_exit, layers[i].layer_id, "epsilon", specs[i].tolerance);
  }
  record_.add("admm", k_exit, "", "converged", done ? 1.0 : 0.0);
  record_.details["admm"] = {{"converged", done},
                             {"epochs", epoch},
                             {"iterations", state.iteration},
                             {"prune_set_mass", out.prune_set_mass},
                             {"epsilon", out.tolerances}};
  record_l1_snapshot(model, "admm");
  checkpoint(model, "admm", static_cast<std::int64_t>(epoch), &state);
  return out;
}

std::vector<Batch> Pipeline::statistic_batches(std::uint64_t tag) const {
  std::vector<std::size_t> order(train_.count());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = Rng::derive(config_.seed, 0x57A75000ULL + tag);
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<Batch> out;
  std::size_t pos = 0;
  for (std::size_t b = 0; b < config_.stat_batches && pos < order.size(); ++b) {
    const std::size_t end = std::min(order.size(), pos + config_.stat_batch_size);
    out.push_back(train_.gather(std::span<const std::size_t>(order).subspan(pos, end - pos)));
    pos = end;
  }
  return out;
}

std::vector<PruneDecision> Pipeline::decide(const Network& model) {
  const auto layers = model.list_conv_layers();
  std::vector<Batch> batches;
  std::map<std::string, std::vector<double>> taylor;
  if (config_.criterion == Criterion::kMeanActivation || config_.criterion == Criterion::kTaylor) {
    batches = statistic_batches(0);
  }
  if (config_.criterion == Criterion::kTaylor) taylor = taylor_raw_all(model, batches);

  std::vector<PruneDecision> out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string& id = layers[i].layer_id;
    const std::size_t n = layers[i].n_filters;
    PruneDecision d;
    d.layer_id = id;
    d.criterion = config_.criterion;
    switch (config_.criterion) {
      case Criterion::kMinWeight:
      case Criterion::kAdmmL1:
        d.scores = score_min_weight(model, id);
        break;
      case Criterion::kMeanActivation:
        d.scores = score_mean_activation(model, id, batches);
        break;
      case Criterion::kTaylor:
        d.scores = l2_rescale(taylor.at(id));
        break;
      case Criterion::kRandom:
        d.scores = score_random(id, n, config_.seed);
        break;
    }
    d.prune_indices = select_prune_set(d.scores, n - keep_count_for(n, config_.prune_rate(i, layers.size())));
    out.push_back(std::move(d));
  }
  return out;
}

Network Pipeline::finetune(Network model, std::size_t epochs, const std::string& stage) {
  StageTimer timer(record_, current_stage_, stage);
  std::size_t step = 0;
  for (std::size_t e = 0; e < epochs; ++e) {
    const double loss = run_epoch(model, e, stage, step, {}, {});
    record_epoch(model, stage, e + 1, loss);
  }
  record_l1_snapshot(model, stage);
  checkpoint(model, stage, static_cast<std::int64_t>(epochs));
  return model;
}

namespace {

double pruned_fraction(const Network& before, const Network& after) {
  std::size_t total = 0, kept = 0;
  for (const auto& l : before.conv_layers()) total += l.weight.n_out();
  for (const auto& l : after.conv_layers()) kept += l.weight.n_out();
  return total == 0 ? 0.0 : static_cast<double>(total - kept) / static_cast<double>(total);
}

}  // namespace

PipelineResult Pipeline::single_shot() {
  PipelineResult result;
  Network model = starting_model();
  if (config_.criterion == Criterion::kAdmmL1) result.admm = train_admm(model);

  Network pruned;
  {
    StageTimer timer(record_, current_stage_, "prune");
    result.accuracy_before_prune = model.evaluate(test_, config_.eval_batch_size);
    result.decisions = decide(model);
    std::map<std::string, std::vector<std::size_t>> prune;
    for (const auto& d : result.decisions) prune[d.layer_id] = d.prune_indices;
    const SurgeryPlan plan = plan_surgery(model, prune);
    pruned = apply_surgery(model, plan);
    result.accuracy_after_prune = pruned.evaluate(test_, config_.eval_batch_size);
    record_.add("prune", 0, "", "accuracy_before_prune", result.accuracy_before_prune);
    record_.add("prune", 0, "", "accuracy_after_prune", result.accuracy_after_prune);
    for (const auto& l : pruned.conv_layers()) {
      record_.add("prune", 0, l.id, "filters_remaining", static_cast<double>(l.weight.n_out()));
    }
    nlohmann::json decisions = nlohmann::json::array();
    for (const auto& d : result.decisions) decisions.push_back(d.to_json());
    record_.details["decisions"] = decisions;
    record_.details["surgery"] = plan.to_json();
    record_.prune_ratio = pruned_fraction(model, pruned);
    record_l1_snapshot(pruned, "prune");
    checkpoint(pruned, "pruned", 0);
  }

  result.model = finetune(std::move(pruned), config_.finetune_epochs, "finetune");
  result.final_accuracy = result.model.evaluate(test_, config_.eval_batch_size);
  record_.add("final", 0, "", "final_accuracy", result.final_accuracy);
  record_.final_accuracy = result.final_accuracy;
  return result;
}

PipelineResult Pipeline::iterative_taylor() {
  PipelineResult result;
  Network model = starting_model();
  const Network original = model;
  const auto layers = model.list_conv_layers();

  std::vector<std::size_t> target(layers.size());
  std::size_t total_target = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::size_t n = layers[i].n_filters;
    const auto want = static_cast<std::size_t>(
        std::llround(config_.prune_rate(i, layers.size()) * static_cast<double>(n)));
    if (want >= n) {
      throw SpecError("target ratio for " + layers[i].layer_id + " would remove all " +
                      std::to_string(n) + " filters");
    }
    target[i] = want;
    total_target += want;
  }
  result.accuracy_before_prune = model.evaluate(test_, config_.eval_batch_size);

  StageTimer timer(record_, current_stage_, "iterative");
  const IterativeSettings& it = config_.iterative;
  const BatchSchedule schedule(train_.count(), it.batch_size, config_.seed);
  const SgdOptions sgd{config_.learning_rate, config_.weight_decay};
  std::vector<std::size_t> pruned_so_far(layers.size(), 0);
  std::size_t total_pruned = 0, round = 0, step = 0, epoch = 0, cursor = 0;
  auto epoch_batches = schedule.epoch(epoch);
  nlohmann::json rounds = nlohmann::json::array();

  while (total_pruned < total_target) {
    const auto batches = statistic_batches(round);
    const auto raw = taylor_raw_all(model, batches);
    // (score, layer, filter); lexicographic order gives the global ranking
    std::vector<std::tuple<double, std::size_t, std::size_t>> candidates;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (pruned_so_far[i] >= target[i]) continue;
      const auto scores = l2_rescale(raw.at(layers[i].layer_id));
      for (std::size_t j = 0; j < scores.size(); ++j) candidates.emplace_back(scores[j], i, j);
    }
    std::sort(candidates.begin(), candidates.end());
    const std::size_t quota = std::min(it.filters_per_round, total_target - total_pruned);
    std::map<std::string, std::vector<std::size_t>> prune;
    std::vector<std::size_t> taken(layers.size(), 0);
    std::size_t count = 0;
    for (const auto& [score, i, j] : candidates) {
      if (count == quota) break;
      if (pruned_so_far[i] + taken[i] >= target[i]) continue;
      prune[layers[i].layer_id].push_back(j);
      ++taken[i];
      ++count;
    }
    if (count == 0) {
      throw SpecError("iterative pruning cannot reach the target without emptying a layer");
    }
    model = apply_surgery(model, plan_surgery(model, prune));
    for (std::size_t i = 0; i < layers.size(); ++i) pruned_so_far[i] += taken[i];
    total_pruned += count;
    ++round;
    rounds.push_back(prune);

    for (std::size_t u = 0; u < it.updates_per_round; ++u) {
      if (cursor == epoch_batches.size()) {
        epoch_batches = schedule.epoch(++epoch);
        cursor = 0;
      }
      const double loss = model.train_step(train_.gather(epoch_batches[cursor++]), sgd);
      ++step;
      ++total_steps_;
      if (step % config_.log_interval == 0) record_.add("iterative", step, "", "loss", loss);
    }
    record_.add("iterative", round, "", "filters_pruned", static_cast<double>(total_pruned));
    record_.add("iterative", round, "", "test_accuracy",
                model.evaluate(test_, config_.eval_batch_size));
    for (const auto& l : model.conv_layers()) {
      record_.add("iterative", round, l.id, "filters_remaining",
                  static_cast<double>(l.weight.n_out()));
    }
  }
  record_.details["rounds"] = rounds;
  record_.prune_ratio = pruned_fraction(original, model);
  result.accuracy_after_prune = model.evaluate(test_, config_.eval_batch_size);
  record_.add("prune", 0, "", "accuracy_before_prune", result.accuracy_before_prune);
  record_.add("prune", 0, "", "accuracy_after_prune", result.accuracy_after_prune);
  record_l1_snapshot(model, "iterative");
  checkpoint(model, "pruned", 0);

  if (it.extra_ft) model = finetune(std::move(model), it.extra_ft_epochs, "extra_finetune");
  result.model = std::move(model);
  result.final_accuracy = result.model.evaluate(test_, config_.eval_batch_size);
  record_.add("final", 0, "", "final_accuracy", result.final_accuracy);
  record_.final_accuracy = result.final_accuracy;
  return result;
}

PipelineResult Pipeline::run() {
  PipelineResult result = config_.kind == PipelineKind::kIterativeTaylor ? iterative_taylor()
                                                                          : single_shot();
  record_.complete = true;
  if (run_dir_) {
    checkpoint(result.model, "final", 0);
    record_.write(*run_dir_);
  }
  return result;
}

}  // namespace chanprune
