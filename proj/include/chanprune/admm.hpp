// Copyright 2026 The chanprune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CHANPRUNE_ADMM_HPP_
#define CHANPRUNE_ADMM_HPP_

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "chanprune/model.hpp"
#include "chanprune/tensor.hpp"

namespace chanprune {

enum class NormKind { kL1, kL2 };
enum class Granularity { kFilter, kWeight };

/// How the two stopping distances combine. kBoth requires both squared
/// distances within tolerance before the loop may exit.
enum class ExitRule { kBoth, kEither };

std::string to_string(NormKind n);
std::string to_string(Granularity g);
std::string to_string(ExitRule r);
NormKind norm_from_string(const std::string& s);
Granularity granularity_from_string(const std::string& s);
ExitRule exit_rule_from_string(const std::string& s);

/// keep = units - round(rate * units), clamped to at least 1.
std::size_t keep_count_for(std::size_t units, double prune_rate);

/// Per-layer sparsity target. For filter granularity keep_count counts
/// filters; for weight granularity it counts individual weights.
struct LayerSparsitySpec {
  std::string layer_id;
  double prune_rate = 0.0;
  std::size_t keep_count = 1;
  double tolerance = 1e-3;
  double penalty = 1e-2;
  Granularity granularity = Granularity::kFilter;

  /// Builds a spec for a layer with `units` prunable units and checks it.
  static LayerSparsitySpec make(std::string layer_id, std::size_t units, double prune_rate,
                                double tolerance, double penalty,
                                Granularity granularity = Granularity::kFilter);

  /// Throws SpecError unless 1 <= keep_count <= units and tolerance/penalty
  /// are positive and finite.
  void validate(std::size_t units) const;

  /// True when the constraint set is the whole space (nothing to prune).
  bool vacuous(std::size_t units) const { return keep_count >= units; }
};

/// Number of prunable units for the spec's granularity.
std::size_t prunable_units(const FilterTensor& w, Granularity g);

/// Per-filter l1 (sum of |w|) or l2 (Frobenius) norm. Bias is not part of
/// the tensor and never contributes.
std::vector<double> filter_norms(const FilterTensor& t, NormKind norm);

/// Indices kept by the projection, ascending. Ranking is by descending norm
/// (or |w| for weight granularity); ties keep the lower index.
std::vector<std::size_t> projection_keep_set(const FilterTensor& t, const LayerSparsitySpec& spec,
                                             NormKind norm);

/// Euclidean-style projection onto the cardinality set: copies the kept
/// filters (or weights) bit-exactly and zeroes the rest.
FilterTensor project_cardinality(const FilterTensor& t, const LayerSparsitySpec& spec,
                                 NormKind norm);

struct RegularizerTerm {
  FilterTensor grad;      // rho * (W - Z + U)
  double penalty = 0.0;   // rho / 2 * ||W - Z + U||_F^2
};

RegularizerTerm admm_regularizer(const FilterTensor& w, const FilterTensor& z,
                                 const FilterTensor& u, double rho);

/// Z_next = project(W + U).
FilterTensor step_z(const FilterTensor& w, const FilterTensor& u, const LayerSparsitySpec& spec,
                    NormKind norm);

/// U_next = U + W_next - Z_next, evaluated as U + (W_next - Z_next) so that
/// W_next = Z_next returns U unchanged.
FilterTensor step_u(const FilterTensor& u, const FilterTensor& w_next,
                    const FilterTensor& z_next);

/// ||W - Z||_F^2 <= eps combined with ||Z - Z_prev||_F^2 <= eps per `rule`.
bool converged(const FilterTensor& w, const FilterTensor& z, const FilterTensor& z_prev,
               double eps, ExitRule rule = ExitRule::kBoth);

/// Auxiliary and scaled dual variables for every conv layer. The unscaled
/// multiplier is never stored.
struct AdmmState {
  std::vector<LayerSparsitySpec> specs;
  std::vector<FilterTensor> z;
  std::vector<FilterTensor> u;
  std::size_t iteration = 0;
  NormKind norm = NormKind::kL1;

  std::size_t index_of(const std::string& layer_id) const;  // LookupError

  /// Tensors and manifest entries for embedding in a checkpoint.
  std::map<std::string, Tensor> to_tensors() const;
  std::map<std::string, std::string> to_metadata() const;
  static AdmmState from_checkpoint(const Checkpoint& ck);
};

/// Z_i = project(W_i), U_i = 0, iteration 0. One spec per conv layer, in
/// layer order; throws ConfigError otherwise.
AdmmState init_state(const Network& model, std::vector<LayerSparsitySpec> specs,
                     NormKind norm = NormKind::kL1);

}  // namespace chanprune

#endif  // CHANPRUNE_ADMM_HPP_
