// Copyright 2026 The chanprune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CHANPRUNE_MODEL_HPP_
#define CHANPRUNE_MODEL_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "chanprune/data.hpp"
#include "chanprune/tensor.hpp"

namespace chanprune {

/// One convolution block: conv (stride 1, symmetric zero padding) -> ReLU ->
/// optional non-overlapping max pool.
struct ConvLayerSpec {
  std::string id;
  std::size_t filters = 0;
  std::size_t kernel = 3;
  std::size_t padding = 0;
  std::size_t pool = 1;  // 1 means no pooling

  friend bool operator==(const ConvLayerSpec&, const ConvLayerSpec&) = default;
};

struct DenseLayerSpec {
  std::string id;
  std::size_t units = 0;

  friend bool operator==(const DenseLayerSpec&, const DenseLayerSpec&) = default;
};

/// Conv stack followed by a flatten and a dense stack. The last dense layer
/// produces the logits; every earlier dense layer is followed by ReLU.
struct ArchitectureSpec {
  std::string name;
  std::size_t in_channels = 1;
  std::size_t in_height = 28;
  std::size_t in_width = 28;
  std::vector<ConvLayerSpec> conv;
  std::vector<DenseLayerSpec> dense;  // last entry's units = class count

  std::size_t classes() const { return dense.empty() ? 0 : dense.back().units; }

  friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;
};

enum class SuccessorKind { kConv, kFlattenToDense, kNone };

std::string to_string(SuccessorKind kind);

struct LayerHandle {
  std::string layer_id;
  std::size_t n_filters = 0;
  SuccessorKind successor_kind = SuccessorKind::kNone;
  bool has_bias = true;
};

struct ConvLayer {
  std::string id;
  std::size_t padding = 0;
  std::size_t pool = 1;
  FilterTensor weight;
  std::vector<float> bias;
};

struct DenseLayer {
  std::string id;
  Tensor weight;  // [units, inputs]
  std::vector<float> bias;
};

/// Extra gradient terms keyed by conv layer id.
using GradientMap = std::map<std::string, FilterTensor>;

struct SgdOptions {
  float learning_rate = 1e-4f;
  /// l2 coefficient on conv and dense weights (biases are not decayed).
  float weight_decay = 5e-4f;
};

/// Parameter gradients of the batch-mean loss, one entry per layer.
struct Gradients {
  std::vector<Tensor> conv_weight;
  std::vector<std::vector<float>> conv_bias;
  std::vector<Tensor> dense_weight;
  std::vector<std::vector<float>> dense_bias;
};

struct LossAndGradients {
  double cross_entropy = 0.0;  // batch mean
  double weight_penalty = 0.0; // 0.5 * weight_decay * sum ||W||^2
  Gradients grads;             // includes the weight-decay term

  double loss() const { return cross_entropy + weight_penalty; }
};

/// Post-ReLU conv feature maps for a batch and, optionally, the gradient of
/// the batch-mean cross-entropy with respect to them.
struct ActivationProbe {
  std::vector<Tensor> activations;      // per conv layer [N, C, H, W]
  std::vector<Tensor> activation_grads; // empty unless requested
  double cross_entropy = 0.0;
};

/// Trainable convolutional classifier. All tensors are float32; the network
/// is a value type and copies are deep.
class Network {
 public:
  Network() = default;
  /// Allocates zero-valued parameters for `spec`. Throws StructuralError on
  /// an inconsistent spec.
  explicit Network(const ArchitectureSpec& spec);

  const std::string& name() const noexcept { return name_; }
  /// Current architecture, with filter counts reflecting any pruning.
  ArchitectureSpec architecture() const;

  std::size_t in_channels() const noexcept { return in_channels_; }
  std::size_t in_height() const noexcept { return in_height_; }
  std::size_t in_width() const noexcept { return in_width_; }
  std::size_t classes() const;

  std::vector<ConvLayer>& conv_layers() noexcept { return conv_; }
  const std::vector<ConvLayer>& conv_layers() const noexcept { return conv_; }
  std::vector<DenseLayer>& dense_layers() noexcept { return dense_; }
  const std::vector<DenseLayer>& dense_layers() const noexcept { return dense_; }

  /// Throws StructuralError when the network has no conv layer.
  std::vector<LayerHandle> list_conv_layers() const;
  std::size_t conv_index(const std::string& layer_id) const;  // LookupError
  ConvLayer& conv(const std::string& layer_id);
  const ConvLayer& conv(const std::string& layer_id) const;

  FilterTensor get_weights(const std::string& layer_id) const;
  void set_weights(const std::string& layer_id, const FilterTensor& weights);

  /// Output spatial size (after pooling) of conv layer i.
  std::pair<std::size_t, std::size_t> conv_output_hw(std::size_t i) const;
  /// Number of inputs the first dense layer should have.
  std::size_t flatten_size() const;
  std::size_t parameter_count() const;

  /// Logits [N, classes].
  Tensor forward(const Tensor& inputs) const;

  LossAndGradients loss_and_gradients(const Batch& batch, float weight_decay) const;

  ActivationProbe probe(const Batch& batch, bool with_gradients) const;

  /// One SGD step: P <- P - lr * (dC/dP + wd * P + extra_P). Returns the
  /// pre-update loss (cross-entropy plus weight penalty). Throws NumericError
  /// on a non-finite loss or gradient, DimensionError or LookupError on a bad
  /// extra gradient; the model is untouched in every error case.
  double train_step(const Batch& batch, const SgdOptions& options,
                    const GradientMap& extra_grads = {});

  /// Fraction of samples whose argmax logit equals the label. Throws
  /// UsageError on an empty dataset.
  double evaluate(const Dataset& dataset, std::size_t batch_size = 256) const;

  friend bool operator==(const Network& a, const Network& b);

 private:
  struct Pass;
  void run_forward(const Tensor& inputs, Pass& pass) const;
  void run_backward(const Batch& batch, Pass& pass, bool want_param_grads,
                    bool want_activation_grads) const;

  std::string name_;
  std::size_t in_channels_ = 0;
  std::size_t in_height_ = 0;
  std::size_t in_width_ = 0;
  std::vector<ConvLayer> conv_;
  std::vector<DenseLayer> dense_;
};

// --- Checkpoints -----------------------------------------------------------

struct CheckpointMetadata {
  std::string architecture;
  std::string stage;
  std::uint64_t seed = 0;
  std::int64_t epoch = 0;
  std::map<std::string, std::string> extra;
};

struct Checkpoint {
  Network model;
  CheckpointMetadata metadata;
  std::map<std::string, Tensor> extra_tensors;
};

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

/// Writes a single-file archive: magic, a key=value text manifest, then named
/// tensors (little-endian float32, row-major, shape header each) and a CRC32
/// trailer. `metadata.architecture` is overwritten by the model's name.
void save_checkpoint(const Network& model, const std::filesystem::path& path,
                     const CheckpointMetadata& metadata,
                     const std::map<std::string, Tensor>& extra_tensors = {});

/// Throws IoError if unreadable, IntegrityError on a corrupt archive.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// As above; throws StructuralError if the stored architecture name differs.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::string& expected_architecture);

}  // namespace chanprune

#endif  // CHANPRUNE_MODEL_HPP_
