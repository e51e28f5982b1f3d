// Copyright 2026 The chanprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "chanprune/admm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "chanprune/errors.hpp"

namespace chanprune {

std::string to_string(NormKind n) { return n == NormKind::kL1 ? "l1" : "l2"; }
std::string to_string(Granularity g) { return g == Granularity::kFilter ? "filter" : "weight"; }
std::string to_string(ExitRule r) { return r == ExitRule::kBoth ? "both" : "either"; }

NormKind norm_from_string(const std::string& s) {
  if (s == "l1") return NormKind::kL1;
  if (s == "l2") return NormKind::kL2;
  throw ConfigError("unknown norm '" + s + "' (expected l1 or l2)");
}

Granularity granularity_from_string(const std::string& s) {
  if (s == "filter") return Granularity::kFilter;
  if (s == "weight") return Granularity::kWeight;
  throw ConfigError("unknown granularity '" + s + "' (expected filter or weight)");
}

ExitRule exit_rule_from_string(const std::string& s) {
  if (s == "both") return ExitRule::kBoth;
  if (s == "either") return ExitRule::kEither;
  throw ConfigError("unknown exit rule '" + s + "' (expected both or either)");
}

std::size_t keep_count_for(std::size_t units, double prune_rate) {
  const auto pruned = static_cast<std::size_t>(std::llround(prune_rate * static_cast<double>(units)));
  return pruned >= units ? 1 : std::max<std::size_t>(1, units - pruned);
}

LayerSparsitySpec LayerSparsitySpec::make(std::string layer_id, std::size_t units,
                                          double prune_rate, double tolerance, double penalty,
                                          Granularity granularity) {
  if (!(prune_rate >= 0.0 && prune_rate < 1.0)) {
    throw SpecError("prune rate for " + layer_id + " must lie in [0, 1)");
  }
  LayerSparsitySpec s;
  s.layer_id = std::move(layer_id);
  s.prune_rate = prune_rate;
  s.keep_count = keep_count_for(units, prune_rate);
  s.tolerance = tolerance;
  s.penalty = penalty;
  s.granularity = granularity;
  s.validate(units);
  return s;
}

void LayerSparsitySpec::validate(std::size_t units) const {
  if (keep_count < 1 || keep_count > units) {
    throw SpecError("keep count " + std::to_string(keep_count) + " for " + layer_id +
                    " outside [1, " + std::to_string(units) + "]");
  }
  if (!(tolerance > 0.0) || !std::isfinite(tolerance)) {
    throw SpecError("tolerance for " + layer_id + " must be positive and finite");
  }
  if (!(penalty > 0.0) || !std::isfinite(penalty)) {
    throw SpecError("penalty for " + layer_id + " must be positive and finite");
  }
}

std::size_t prunable_units(const FilterTensor& w, Granularity g) {
  return g == Granularity::kFilter ? w.n_out() : w.size();
}

std::vector<double> filter_norms(const FilterTensor& t, NormKind norm) {
  std::vector<double> out(t.n_out());
  for (std::size_t j = 0; j < t.n_out(); ++j) {
    double acc = 0.0;
    for (float v : t.filter(j)) {
      acc += norm == NormKind::kL1 ? std::fabs(static_cast<double>(v))
                                   : static_cast<double>(v) * v;
    }
    out[j] = norm == NormKind::kL1 ? acc : std::sqrt(acc);
  }
  return out;
}

namespace {

/// Indices of the `keep` largest scores; ties favour the lower index.
std::vector<std::size_t> top_k(const std::vector<double>& scores, std::size_t keep) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  order.resize(keep);
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace

std::vector<std::size_t> projection_keep_set(const FilterTensor& t, const LayerSparsitySpec& spec,
                                             NormKind norm) {
  const std::size_t units = prunable_units(t, spec.granularity);
  if (spec.keep_count > units) {
    throw SpecError("keep count " + std::to_string(spec.keep_count) + " exceeds " +
                    std::to_string(units) + " units of " + t.layer_id());
  }
  if (spec.granularity == Granularity::kFilter) return top_k(filter_norms(t, norm), spec.keep_count);
  std::vector<double> mags(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) mags[i] = std::fabs(static_cast<double>(t[i]));
  return top_k(mags, spec.keep_count);
}

FilterTensor project_cardinality(const FilterTensor& t, const LayerSparsitySpec& spec,
                                 NormKind norm) {
  const auto keep = projection_keep_set(t, spec, norm);
  FilterTensor out(t.layer_id(), t.n_out(), t.n_in(), t.kh(), t.kw());
  if (spec.granularity == Granularity::kFilter) {
    for (std::size_t j : keep) std::ranges::copy(t.filter(j), out.filter(j).begin());
  } else {
    for (std::size_t i : keep) out[i] = t[i];
  }
  return out;
}

RegularizerTerm admm_regularizer(const FilterTensor& w, const FilterTensor& z,
                                 const FilterTensor& u, double rho) {
  require_same_shape(w.shape(), z.shape(), "admm_regularizer W/Z");
  require_same_shape(w.shape(), u.shape(), "admm_regularizer W/U");
  RegularizerTerm term{FilterTensor(w.layer_id(), w.n_out(), w.n_in(), w.kh(), w.kw()), 0.0};
  const auto r = static_cast<float>(rho);
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const float d = w[i] - z[i] + u[i];
    term.grad[i] = r * d;
    acc += static_cast<double>(d) * d;
  }
  term.penalty = 0.5 * rho * acc;
  return term;
}

FilterTensor step_z(const FilterTensor& w, const FilterTensor& u, const LayerSparsitySpec& spec,
                    NormKind norm) {
  require_same_shape(w.shape(), u.shape(), "step_z W/U");
  FilterTensor sum = w;
  for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = w[i] + u[i];
  return project_cardinality(sum, spec, norm);
}

FilterTensor step_u(const FilterTensor& u, const FilterTensor& w_next,
                    const FilterTensor& z_next) {
  require_same_shape(u.shape(), w_next.shape(), "step_u U/W");
  require_same_shape(u.shape(), z_next.shape(), "step_u U/Z");
  FilterTensor out = u;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = u[i] + (w_next[i] - z_next[i]);
  return out;
}

bool converged(const FilterTensor& w, const FilterTensor& z, const FilterTensor& z_prev,
               double eps, ExitRule rule) {
  require_same_shape(w.shape(), z.shape(), "converged W/Z");
  require_same_shape(z.shape(), z_prev.shape(), "converged Z/Z_prev");
  const bool primal = squared_distance(w.values(), z.values()) <= eps;
  const bool dual = squared_distance(z.values(), z_prev.values()) <= eps;
  return rule == ExitRule::kBoth ? (primal && dual) : (primal || dual);
}

std::size_t AdmmState::index_of(const std::string& layer_id) const {
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (specs[i].layer_id == layer_id) return i;
  }
  throw LookupError("ADMM state has no layer " + layer_id);
}

std::map<std::string, Tensor> AdmmState::to_tensors() const {
  std::map<std::string, Tensor> out;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    out["admm.Z." + specs[i].layer_id] = z[i].tensor();
    out["admm.U." + specs[i].layer_id] = u[i].tensor();
  }
  return out;
}

std::map<std::string, std::string> AdmmState::to_metadata() const {
  std::map<std::string, std::string> out;
  out["admm.iteration"] = std::to_string(iteration);
  out["admm.norm"] = to_string(norm);
  out["admm.layers"] = std::to_string(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    std::ostringstream v;
    v.precision(17);
    v << s.layer_id << ',' << s.prune_rate << ',' << s.keep_count << ',' << s.tolerance << ','
      << s.penalty << ',' << to_string(s.granularity);
    out["admm.spec." + std::to_string(i)] = v.str();
  }
  return out;
}

AdmmState AdmmState::from_checkpoint(const Checkpoint& ck) {
  const auto& meta = ck.metadata.extra;
  auto get = [&](const std::string& k) -> const std::string& {
    auto it = meta.find(k);
    if (it == meta.end()) throw IntegrityError("checkpoint has no ADMM state (" + k + ")");
    return it->second;
  };
  AdmmState state;
  try {
    state.iteration = std::stoull(get("admm.iteration"));
    state.norm = norm_from_string(get("admm.norm"));
    const std::size_t layers = std::stoull(get("admm.layers"));
    for (std::size_t i = 0; i < layers; ++i) {
      std::istringstream in(get("admm.spec." + std::to_string(i)));
      std::vector<std::string> parts;
      for (std::string p; std::getline(in, p, ',');) parts.push_back(p);
      if (parts.size() != 6) throw IntegrityError("malformed ADMM spec entry");
      LayerSparsitySpec s;
      s.layer_id = parts[0];
      s.prune_rate = std::stod(parts[1]);
      s.keep_count = std::stoull(parts[2]);
      s.tolerance = std::stod(parts[3]);
      s.penalty = std::stod(parts[4]);
      s.granularity = granularity_from_string(parts[5]);
      auto zt = ck.extra_tensors.find("admm.Z." + s.layer_id);
      auto ut = ck.extra_tensors.find("admm.U." + s.layer_id);
      if (zt == ck.extra_tensors.end() || ut == ck.extra_tensors.end()) {
        throw IntegrityError("checkpoint missing ADMM tensors for " + s.layer_id);
      }
      state.z.emplace_back(s.layer_id, zt->second);
      state.u.emplace_back(s.layer_id, ut->second);
      state.specs.push_back(std::move(s));
    }
  } catch (const std::logic_error&) {
    throw IntegrityError("malformed ADMM metadata in checkpoint");
  } catch (const ConfigError& e) {
    throw IntegrityError(std::string("malformed ADMM metadata: ") + e.what());
  }
  return state;
}

AdmmState init_state(const Network& model, std::vector<LayerSparsitySpec> specs, NormKind norm) {
  const auto layers = model.list_conv_layers();
  if (specs.size() != layers.size()) {
    throw ConfigError("got " + std::to_string(specs.size()) + " sparsity specs for " +
                      std::to_string(layers.size()) + " conv layers");
  }
  AdmmState state;
  state.norm = norm;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (specs[i].layer_id != layers[i].layer_id) {
      throw ConfigError("sparsity spec " + std::to_string(i) + " names " + specs[i].layer_id +
                        " but layer " + std::to_string(i) + " is " + layers[i].layer_id);
    }
    const FilterTensor w = model.get_weights(layers[i].layer_id);
    specs[i].validate(prunable_units(w, specs[i].granularity));
    state.z.push_back(project_cardinality(w, specs[i], norm));
    state.u.emplace_back(w.layer_id(), w.n_out(), w.n_in(), w.kh(), w.kw());
  }
  state.specs = std::move(specs);
  return state;
}

}  // namespace chanprune
