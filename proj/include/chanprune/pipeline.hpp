// Copyright 2026 The chanprune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CHANPRUNE_PIPELINE_HPP_
#define CHANPRUNE_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "chanprune/admm.hpp"
#include "chanprune/config.hpp"
#include "chanprune/criteria.hpp"
#include "chanprune/data.hpp"
#include "chanprune/model.hpp"
#include "chanprune/record.hpp"

namespace chanprune {

enum class PipelineKind { kSingleShot, kIterativeTaylor };

struct AdmmSettings {
  std::vector<double> prune_rates;  // one per conv layer, or one broadcast value
  double rho = 1e-2;
  double epsilon_scale = 1e-3;      // eps_i = scale * numel(W_i)
  std::vector<double> epsilon;      // absolute per-layer override
  NormKind norm = NormKind::kL1;
  Granularity granularity = Granularity::kFilter;
  std::size_t update_interval = 0;  // minibatch steps per outer iteration; 0 = one epoch
  ExitRule exit_rule = ExitRule::kBoth;
  std::size_t max_epochs = 60;
  std::size_t patience = 5;
  bool from_scratch = false;
};

struct IterativeSettings {
  std::size_t filters_per_round = 10;
  std::size_t updates_per_round = 500;
  std::size_t batch_size = 50;
  bool extra_ft = false;
  std::size_t extra_ft_epochs = 100;
};

/// Typed, validated view of a Config.
struct RunConfig {
  std::string run_id;
  std::string architecture = "toy";
  std::vector<std::size_t> filters;
  DatasetHandle train_data;
  DatasetHandle test_data;
  std::uint64_t seed = 0;
  float learning_rate = 1e-4f;
  float weight_decay = 5e-4f;
  std::size_t batch_size = 64;
  std::size_t pretrain_epochs = 10;
  std::size_t finetune_epochs = 100;
  std::size_t log_interval = 10;
  std::size_t eval_batch_size = 256;
  std::filesystem::path pretrained_checkpoint;
  AdmmSettings admm;
  Criterion criterion = Criterion::kAdmmL1;
  PipelineKind kind = PipelineKind::kSingleShot;
  IterativeSettings iterative;
  std::size_t stat_batches = 10;
  std::size_t stat_batch_size = 50;

  /// Throws ConfigError listing every violation.
  static RunConfig from_config(const Config& config);

  /// Per-layer prune rate, broadcasting a single configured value.
  double prune_rate(std::size_t layer_index, std::size_t layer_count) const;
  /// Comparison-table column: criterion name, "admm_weight" or "iterative_te[+ft]".
  std::string criterion_label() const;
  std::string label() const;
};

struct AdmmOutcome {
  AdmmState state;
  bool converged = false;
  std::size_t epochs_run = 0;
  /// Per layer: sum over the prune set (complement of Z's support) of
  /// ||W_filter||_F^2 at loop exit.
  std::vector<double> prune_set_mass;
  std::vector<double> tolerances;
};

struct PipelineResult {
  Network model;
  double final_accuracy = 0.0;
  double accuracy_before_prune = 0.0;
  double accuracy_after_prune = 0.0;
  std::vector<PruneDecision> decisions;
  std::optional<AdmmOutcome> admm;
};

/// One experiment: owns its datasets, record and (optionally) run directory.
/// Stage boundaries are checkpointed when a run directory is given.
class Pipeline {
 public:
  /// Loads the configured datasets.
  explicit Pipeline(RunConfig config, std::optional<std::filesystem::path> run_dir = {});
  Pipeline(RunConfig config, Dataset train, Dataset test,
           std::optional<std::filesystem::path> run_dir = {});

  const RunConfig& config() const noexcept { return config_; }
  const Dataset& train_set() const noexcept { return train_; }
  const Dataset& test_set() const noexcept { return test_; }
  RunRecord& record() noexcept { return record_; }
  const RunRecord& record() const noexcept { return record_; }

  /// Fresh seed-initialized model for the configured architecture.
  Network initial_model() const;

  /// Plain SGD for the configured pretrain epochs. Checkpoint stage "pretrain".
  Network pretrain();

  /// ADMM-regularized training until converged or the epoch cap.
  AdmmOutcome train_admm(Network& model);

  /// Per-layer scores and prune sets for the configured criterion.
  std::vector<PruneDecision> decide(const Network& model);

  /// Plain SGD on an already-pruned model.
  Network finetune(Network model, std::size_t epochs, const std::string& stage);

  /// train (ADMM or vanilla) -> prune -> fine-tune.
  PipelineResult single_shot();

  /// Repeated {taylor score -> prune lowest -> short fine-tune}.
  PipelineResult iterative_taylor();

  /// Dispatches on config().kind, fills the record, writes the run directory.
  PipelineResult run();

  /// Seed-fixed batches feeding the activation-based criteria.
  std::vector<Batch> statistic_batches(std::uint64_t tag) const;

  /// Number of SGD steps taken so far (all stages).
  std::size_t steps_taken() const noexcept { return total_steps_; }

  /// Most recently entered stage; names the failing stage after an exception.
  const std::string& current_stage() const noexcept { return current_stage_; }

 private:
  double run_epoch(Network& model, std::size_t epoch_index, const std::string& stage,
                   std::size_t& step, const std::function<GradientMap(const Network&)>& extra,
                   const std::function<bool(const Network&, std::size_t)>& after_step);
  void record_epoch(const Network& model, const std::string& stage, std::size_t epoch,
                    double mean_loss);
  void record_l1_snapshot(const Network& model, const std::string& stage);
  void checkpoint(const Network& model, const std::string& stage, std::int64_t epoch,
                  const AdmmState* state = nullptr) const;
  Network starting_model();

  RunConfig config_;
  Dataset train_;
  Dataset test_;
  std::optional<std::filesystem::path> run_dir_;
  RunRecord record_;
  std::size_t total_steps_ = 0;
  std::string current_stage_ = "setup";
};

}  // namespace chanprune

#endif  // CHANPRUNE_PIPELINE_HPP_
