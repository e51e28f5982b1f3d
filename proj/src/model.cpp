// Copyright 2026 The chanprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "chanprune/model.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "chanprune/errors.hpp"

namespace chanprune {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

struct Geometry {
  std::size_t in_c, in_h, in_w;
  std::size_t out_c, conv_h, conv_w;  // after conv, before pooling
  std::size_t pool_h, pool_w;         // after pooling
  std::size_t kernel, padding, pool;

  std::size_t patch() const { return in_c * kernel * kernel; }
  std::size_t positions() const { return conv_h * conv_w; }
};

void im2col(const float* x, const Geometry& g, float* col) {
  const long k = static_cast<long>(g.kernel);
  const long pad = static_cast<long>(g.padding);
  const long H = static_cast<long>(g.in_h), W = static_cast<long>(g.in_w);
  const long Ho = static_cast<long>(g.conv_h), Wo = static_cast<long>(g.conv_w);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.in_c; ++c) {
    const float* plane = x + c * g.in_h * g.in_w;
    for (long ki = 0; ki < k; ++ki) {
      for (long kj = 0; kj < k; ++kj, ++row) {
        float* dst = col + row * g.positions();
        for (long oh = 0; oh < Ho; ++oh) {
          const long ih = oh + ki - pad;
          for (long ow = 0; ow < Wo; ++ow) {
            const long iw = ow + kj - pad;
            dst[oh * Wo + ow] =
                (ih >= 0 && ih < H && iw >= 0 && iw < W) ? plane[ih * W + iw] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im_add(const float* col, const Geometry& g, float* dx) {
  const long k = static_cast<long>(g.kernel);
  const long pad = static_cast<long>(g.padding);
  const long H = static_cast<long>(g.in_h), W = static_cast<long>(g.in_w);
  const long Ho = static_cast<long>(g.conv_h), Wo = static_cast<long>(g.conv_w);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.in_c; ++c) {
    float* plane = dx + c * g.in_h * g.in_w;
    for (long ki = 0; ki < k; ++ki) {
      for (long kj = 0; kj < k; ++kj, ++row) {
        const float* src = col + row * g.positions();
        for (long oh = 0; oh < Ho; ++oh) {
          const long ih = oh + ki - pad;
          if (ih < 0 || ih >= H) continue;
          for (long ow = 0; ow < Wo; ++ow) {
            const long iw = ow + kj - pad;
            if (iw >= 0 && iw < W) plane[ih * W + iw] += src[oh * Wo + ow];
          }
        }
      }
    }
  }
}

std::size_t argmax_row(const float* row, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (row[i] > row[best]) best = i;
  }
  return best;
}

bool finite(std::span<const float> v) {
  return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

}  // namespace

std::string to_string(SuccessorKind kind) {
  switch (kind) {
    case SuccessorKind::kConv:
      return "conv";
    case SuccessorKind::kFlattenToDense:
      return "flatten-to-dense";
    case SuccessorKind::kNone:
      return "none";
  }
  return "none";
}

struct Network::Pass {
  std::size_t n = 0;
  std::vector<Geometry> geo;
  std::vector<std::vector<float>> cols;  // per conv layer, n * patch * positions
  std::vector<Tensor> post;              // post-ReLU, pre-pool
  std::vector<Tensor> pooled;
  std::vector<std::vector<std::uint32_t>> argmax;
  std::vector<Tensor> dense_in;  // input of dense layer d, [n, inputs]
  Tensor logits;
  double cross_entropy = 0.0;
  Gradients grads;
  std::vector<Tensor> act_grads;
};

Network::Network(const ArchitectureSpec& spec)
    : name_(spec.name),
      in_channels_(spec.in_channels),
      in_height_(spec.in_height),
      in_width_(spec.in_width) {
  if (spec.in_channels == 0 || spec.in_height == 0 || spec.in_width == 0) {
    throw StructuralError("architecture " + spec.name + " has an empty input shape");
  }
  if (spec.dense.empty()) {
    throw StructuralError("architecture " + spec.name + " needs at least one dense layer");
  }
  std::set<std::string> ids;
  std::size_t channels = spec.in_channels;
  long h = static_cast<long>(spec.in_height), w = static_cast<long>(spec.in_width);
  for (const auto& c : spec.conv) {
    if (!ids.insert(c.id).second) throw StructuralError("duplicate layer id " + c.id);
    if (c.filters == 0 || c.kernel == 0 || c.pool == 0) {
      throw StructuralError("conv layer " + c.id + " has a zero filter count, kernel or pool");
    }
    h = h + 2 * static_cast<long>(c.padding) - static_cast<long>(c.kernel) + 1;
    w = w + 2 * static_cast<long>(c.padding) - static_cast<long>(c.kernel) + 1;
    h /= static_cast<long>(c.pool);
    w /= static_cast<long>(c.pool);
    if (h < 1 || w < 1) {
      throw StructuralError("conv layer " + c.id + " reduces the feature map below 1x1");
    }
    ConvLayer layer;
    layer.id = c.id;
    layer.padding = c.padding;
    layer.pool = c.pool;
    layer.weight = FilterTensor(c.id, c.filters, channels, c.kernel, c.kernel);
    layer.bias.assign(c.filters, 0.0f);
    conv_.push_back(std::move(layer));
    channels = c.filters;
  }
  std::size_t inputs = channels * static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  for (const auto& d : spec.dense) {
    if (!ids.insert(d.id).second) throw StructuralError("duplicate layer id " + d.id);
    if (d.units == 0) throw StructuralError("dense layer " + d.id + " has no units");
    DenseLayer layer;
    layer.id = d.id;
    layer.weight = Tensor({d.units, inputs});
    layer.bias.assign(d.units, 0.0f);
    dense_.push_back(std::move(layer));
    inputs = d.units;
  }
}

ArchitectureSpec Network::architecture() const {
  ArchitectureSpec spec;
  spec.name = name_;
  spec.in_channels = in_channels_;
  spec.in_height = in_height_;
  spec.in_width = in_width_;
  for (const auto& c : conv_) {
    spec.conv.push_back({c.id, c.weight.n_out(), c.weight.kh(), c.padding, c.pool});
  }
  for (const auto& d : dense_) spec.dense.push_back({d.id, d.weight.dim(0)});
  return spec;
}

std::size_t Network::classes() const {
  return dense_.empty() ? 0 : dense_.back().weight.dim(0);
}

std::vector<LayerHandle> Network::list_conv_layers() const {
  if (conv_.empty()) throw StructuralError("network " + name_ + " has no conv layers");
  std::vector<LayerHandle> out;
  for (std::size_t i = 0; i < conv_.size(); ++i) {
    SuccessorKind kind = SuccessorKind::kConv;
    if (i + 1 == conv_.size()) {
      kind = dense_.empty() ? SuccessorKind::kNone : SuccessorKind::kFlattenToDense;
    }
    out.push_back({conv_[i].id, conv_[i].weight.n_out(), kind, true});
  }
  return out;
}

std::size_t Network::conv_index(const std::string& layer_id) const {
  for (std::size_t i = 0; i < conv_.size(); ++i) {
    if (conv_[i].id == layer_id) return i;
  }
  throw LookupError("unknown conv layer " + layer_id);
}

ConvLayer& Network::conv(const std::string& layer_id) { return conv_[conv_index(layer_id)]; }

const ConvLayer& Network::conv(const std::string& layer_id) const {
  return conv_[conv_index(layer_id)];
}

FilterTensor Network::get_weights(const std::string& layer_id) const {
  return conv(layer_id).weight;
}

void Network::set_weights(const std::string& layer_id, const FilterTensor& weights) {
  ConvLayer& layer = conv(layer_id);
  require_same_shape(weights.shape(), layer.weight.shape(), "set_weights " + layer_id);
  layer.weight = FilterTensor(layer_id, weights.tensor());
}

std::pair<std::size_t, std::size_t> Network::conv_output_hw(std::size_t i) const {
  std::size_t h = in_height_, w = in_width_;
  for (std::size_t l = 0; l <= i && l < conv_.size(); ++l) {
    const auto& c = conv_[l];
    h = (h + 2 * c.padding - c.weight.kh() + 1) / c.pool;
    w = (w + 2 * c.padding - c.weight.kw() + 1) / c.pool;
  }
  return {h, w};
}

std::size_t Network::flatten_size() const {
  if (conv_.empty()) return in_channels_ * in_height_ * in_width_;
  auto [h, w] = conv_output_hw(conv_.size() - 1);
  return conv_.back().weight.n_out() * h * w;
}

std::size_t Network::parameter_count() const {
  std::size_t total = 0;
  for (const auto& c : conv_) total += c.weight.size() + c.bias.size();
  for (const auto& d : dense_) total += d.weight.size() + d.bias.size();
  return total;
}

void Network::run_forward(const Tensor& inputs, Pass& pass) const {
  if (inputs.rank() != 4 || inputs.dim(1) != in_channels_ || inputs.dim(2) != in_height_ ||
      inputs.dim(3) != in_width_) {
    throw DimensionError("network " + name_ + " expects input [N, " +
                         std::to_string(in_channels_) + ", " + std::to_string(in_height_) +
                         ", " + std::to_string(in_width_) + "], got " +
                         shape_string(inputs.shape()));
  }
  const std::size_t n = inputs.dim(0);
  pass.n = n;
  pass.geo.clear();
  pass.cols.assign(conv_.size(), {});
  pass.post.assign(conv_.size(), {});
  pass.pooled.assign(conv_.size(), {});
  pass.argmax.assign(conv_.size(), {});

  const float* x = inputs.data();
  std::size_t c_in = in_channels_, h = in_height_, w = in_width_;
  for (std::size_t l = 0; l < conv_.size(); ++l) {
    const ConvLayer& layer = conv_[l];
    if (layer.weight.n_in() != c_in) {
      throw StructuralError("conv layer " + layer.id + " expects " +
                            std::to_string(layer.weight.n_in()) + " input channels, gets " +
                            std::to_string(c_in));
    }
    Geometry g{};
    g.in_c = c_in;
    g.in_h = h;
    g.in_w = w;
    g.out_c = layer.weight.n_out();
    g.kernel = layer.weight.kh();
    g.padding = layer.padding;
    g.pool = layer.pool;
    g.conv_h = h + 2 * g.padding - g.kernel + 1;
    g.conv_w = w + 2 * g.padding - g.kernel + 1;
    g.pool_h = g.conv_h / g.pool;
    g.pool_w = g.conv_w / g.pool;
    const std::size_t K = g.patch(), P = g.positions();

    auto& cols = pass.cols[l];
    cols.resize(n * K * P);
    Tensor post({n, g.out_c, g.conv_h, g.conv_w});
    ConstMatMap wmat(layer.weight.tensor().data(), static_cast<long>(g.out_c),
                     static_cast<long>(K));
    Eigen::Map<const Eigen::VectorXf> bias(layer.bias.data(), static_cast<long>(g.out_c));
    for (std::size_t s = 0; s < n; ++s) {
      float* col = cols.data() + s * K * P;
      im2col(x + s * g.in_c * g.in_h * g.in_w, g, col);
      MatMap out(post.data() + s * g.out_c * P, static_cast<long>(g.out_c), static_cast<long>(P));
      out.noalias() = wmat * ConstMatMap(col, static_cast<long>(K), static_cast<long>(P));
      out.colwise() += bias;
      out = out.cwiseMax(0.0f);
    }
    pass.post[l] = std::move(post);

    if (g.pool > 1) {
      Tensor pooled({n, g.out_c, g.pool_h, g.pool_w});
      auto& arg = pass.argmax[l];
      arg.resize(pooled.size());
      const Tensor& src = pass.post[l];
      std::size_t o = 0;
      for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t c = 0; c < g.out_c; ++c) {
          const std::size_t plane = (s * g.out_c + c) * P;
          for (std::size_t ph = 0; ph < g.pool_h; ++ph) {
            for (std::size_t pw = 0; pw < g.pool_w; ++pw, ++o) {
              std::size_t best = plane + (ph * g.pool) * g.conv_w + pw * g.pool;
              for (std::size_t i = 0; i < g.pool; ++i) {
                for (std::size_t j = 0; j < g.pool; ++j) {
                  const std::size_t idx = plane + (ph * g.pool + i) * g.conv_w + pw * g.pool + j;
                  if (src[idx] > src[best]) best = idx;
                }
              }
              pooled[o] = src[best];
              arg[o] = static_cast<std::uint32_t>(best - s * g.out_c * P);
            }
          }
        }
      }
      pass.pooled[l] = std::move(pooled);
    } else {
      pass.pooled[l] = pass.post[l];
    }
    pass.geo.push_back(g);
    x = pass.pooled[l].data();
    c_in = g.out_c;
    h = g.pool_h;
    w = g.pool_w;
  }

  std::size_t features = c_in * h * w;
  pass.dense_in.assign(dense_.size(), {});
  Tensor current({n, features},
                 std::vector<float>(x, x + n * features));
  for (std::size_t d = 0; d < dense_.size(); ++d) {
    const DenseLayer& layer = dense_[d];
    if (layer.weight.dim(1) != features) {
      throw StructuralError("dense layer " + layer.id + " expects " +
                            std::to_string(layer.weight.dim(1)) + " inputs, gets " +
                            std::to_string(features));
    }
    const std::size_t units = layer.weight.dim(0);
    Tensor out({n, units});
    MatMap y(out.data(), static_cast<long>(n), static_cast<long>(units));
    y.noalias() = ConstMatMap(current.data(), static_cast<long>(n), static_cast<long>(features)) *
                  ConstMatMap(layer.weight.data(), static_cast<long>(units),
                              static_cast<long>(features))
                      .transpose();
    y.rowwise() +=
        Eigen::Map<const Eigen::RowVectorXf>(layer.bias.data(), static_cast<long>(units));
    if (d + 1 < dense_.size()) y = y.cwiseMax(0.0f);
    pass.dense_in[d] = std::move(current);
    current = std::move(out);
    features = units;
  }
  pass.logits = std::move(current);
}

void Network::run_backward(const Batch& batch, Pass& pass, bool want_param_grads,
                           bool want_activation_grads) const {
  const std::size_t n = pass.n;
  const std::size_t classes = this->classes();
  if (batch.labels.size() != n) {
    throw DimensionError("batch has " + std::to_string(n) + " inputs but " +
                         std::to_string(batch.labels.size()) + " labels");
  }

  // softmax cross-entropy, batch mean
  Tensor dy({n, classes});
  double total = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const int label = batch.labels[s];
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw UsageError("label " + std::to_string(label) + " outside [0, " +
                       std::to_string(classes) + ")");
    }
    const float* z = pass.logits.data() + s * classes;
    double zmax = z[0];
    for (std::size_t k = 1; k < classes; ++k) zmax = std::max(zmax, static_cast<double>(z[k]));
    double sum = 0.0;
    for (std::size_t k = 0; k < classes; ++k) sum += std::exp(z[k] - zmax);
    const double log_sum = zmax + std::log(sum);
    total += log_sum - z[label];
    for (std::size_t k = 0; k < classes; ++k) {
      const double p = std::exp(z[k] - log_sum);
      dy[s * classes + k] =
          static_cast<float>((p - (static_cast<std::size_t>(label) == k ? 1.0 : 0.0)) / n);
    }
  }
  pass.cross_entropy = total / static_cast<double>(n);

  Gradients& grads = pass.grads;
  grads.dense_weight.assign(dense_.size(), {});
  grads.dense_bias.assign(dense_.size(), {});
  grads.conv_weight.assign(conv_.size(), {});
  grads.conv_bias.assign(conv_.size(), {});

  for (std::size_t d = dense_.size(); d-- > 0;) {
    const DenseLayer& layer = dense_[d];
    const std::size_t units = layer.weight.dim(0), inputs = layer.weight.dim(1);
    if (d + 1 < dense_.size()) {
      // ReLU mask from this layer's output, which is the next layer's input.
      const Tensor& out = pass.dense_in[d + 1];
      for (std::size_t i = 0; i < dy.size(); ++i) {
        if (out[i] <= 0.0f) dy[i] = 0.0f;
      }
    }
    ConstMatMap g(dy.data(), static_cast<long>(n), static_cast<long>(units));
    ConstMatMap x(pass.dense_in[d].data(), static_cast<long>(n), static_cast<long>(inputs));
    ConstMatMap wmat(layer.weight.data(), static_cast<long>(units), static_cast<long>(inputs));
    if (want_param_grads) {
      Tensor gw({units, inputs});
      MatMap(gw.data(), static_cast<long>(units), static_cast<long>(inputs)).noalias() =
          g.transpose() * x;
      grads.dense_weight[d] = std::move(gw);
      std::vector<float> gb(units);
      Eigen::Map<Eigen::RowVectorXf>(gb.data(), static_cast<long>(units)) = g.colwise().sum();
      grads.dense_bias[d] = std::move(gb);
    }
    if (d == 0 && conv_.empty()) break;
    Tensor dx({n, inputs});
    MatMap(dx.data(), static_cast<long>(n), static_cast<long>(inputs)).noalias() = g * wmat;
    dy = std::move(dx);
  }

  if (want_activation_grads) pass.act_grads.assign(conv_.size(), {});
  // dy now holds the gradient w.r.t. the flattened pooled output of the last conv layer.
  std::vector<float> dpooled(dy.values().begin(), dy.values().end());
  for (std::size_t l = conv_.size(); l-- > 0;) {
    const Geometry& g = pass.geo[l];
    const std::size_t K = g.patch(), P = g.positions();
    Tensor dpost({n, g.out_c, g.conv_h, g.conv_w});
    if (g.pool > 1) {
      const auto& arg = pass.argmax[l];
      const std::size_t per_sample = g.out_c * g.pool_h * g.pool_w;
      for (std::size_t s = 0; s < n; ++s) {
        float* dst = dpost.data() + s * g.out_c * P;
        for (std::size_t i = 0; i < per_sample; ++i) {
          dst[arg[s * per_sample + i]] += dpooled[s * per_sample + i];
        }
      }
    } else {
      std::copy(dpooled.begin(), dpooled.end(), dpost.data());
    }
    if (want_activation_grads) pass.act_grads[l] = dpost;
    const Tensor& post = pass.post[l];
    for (std::size_t i = 0; i < dpost.size(); ++i) {
      if (post[i] <= 0.0f) dpost[i] = 0.0f;
    }
    const ConvLayer& layer = conv_[l];
    ConstMatMap wmat(layer.weight.tensor().data(), static_cast<long>(g.out_c),
                     static_cast<long>(K));
    RowMat gw;
    Eigen::VectorXf gb;
    if (want_param_grads) {
      gw = RowMat::Zero(static_cast<long>(g.out_c), static_cast<long>(K));
      gb = Eigen::VectorXf::Zero(static_cast<long>(g.out_c));
    }
    const bool need_dx = l > 0;
    std::vector<float> dx;
    if (need_dx) dx.assign(n * g.in_c * g.in_h * g.in_w, 0.0f);
    RowMat dcol;
    for (std::size_t s = 0; s < n; ++s) {
      ConstMatMap dout(dpost.data() + s * g.out_c * P, static_cast<long>(g.out_c),
                       static_cast<long>(P));
      ConstMatMap col(pass.cols[l].data() + s * K * P, static_cast<long>(K),
                      static_cast<long>(P));
      if (want_param_grads) {
        gw.noalias() += dout * col.transpose();
        gb += dout.rowwise().sum();
      }
      if (need_dx) {
        dcol.noalias() = wmat.transpose() * dout;
        col2im_add(dcol.data(), g, dx.data() + s * g.in_c * g.in_h * g.in_w);
      }
    }
    if (want_param_grads) {
      grads.conv_weight[l] = Tensor(layer.weight.shape(),
                                    std::vector<float>(gw.data(), gw.data() + gw.size()));
      grads.conv_bias[l] = std::vector<float>(gb.data(), gb.data() + gb.size());
    }
    dpooled = std::move(dx);
  }
}

Tensor Network::forward(const Tensor& inputs) const {
  Pass pass;
  run_forward(inputs, pass);
  return std::move(pass.logits);
}

LossAndGradients Network::loss_and_gradients(const Batch& batch, float weight_decay) const {
  if (batch.size() == 0) throw UsageError("empty batch");
  Pass pass;
  run_forward(batch.inputs, pass);
  run_backward(batch, pass, true, false);
  LossAndGradients out;
  out.cross_entropy = pass.cross_entropy;
  out.grads = std::move(pass.grads);
  double penalty = 0.0;
  auto decay = [&](std::span<const float> w, Tensor& g) {
    penalty += squared_norm(w);
    if (weight_decay == 0.0f) return;
    for (std::size_t i = 0; i < w.size(); ++i) g[i] += weight_decay * w[i];
  };
  for (std::size_t l = 0; l < conv_.size(); ++l) decay(conv_[l].weight.values(), out.grads.conv_weight[l]);
  for (std::size_t d = 0; d < dense_.size(); ++d) decay(dense_[d].weight.values(), out.grads.dense_weight[d]);
  out.weight_penalty = 0.5 * static_cast<double>(weight_decay) * penalty;
  return out;
}

ActivationProbe Network::probe(const Batch& batch, bool with_gradients) const {
  if (batch.size() == 0) throw UsageError("empty batch");
  Pass pass;
  run_forward(batch.inputs, pass);
  ActivationProbe out;
  if (with_gradients) {
    run_backward(batch, pass, false, true);
    out.activation_grads = std::move(pass.act_grads);
    out.cross_entropy = pass.cross_entropy;
  }
  out.activations = std::move(pass.post);
  return out;
}

double Network::train_step(const Batch& batch, const SgdOptions& options,
                           const GradientMap& extra_grads) {
  for (const auto& [id, g] : extra_grads) {
    const ConvLayer& layer = conv(id);
    require_same_shape(g.shape(), layer.weight.shape(), "extra gradient for " + id);
    if (!g.all_finite()) throw NumericError(id, "non-finite extra gradient");
  }
  LossAndGradients lg = loss_and_gradients(batch, options.weight_decay);
  if (!std::isfinite(lg.loss())) throw NumericError("output", "non-finite loss");
  for (std::size_t l = 0; l < conv_.size(); ++l) {
    if (!finite(lg.grads.conv_weight[l].values()) || !finite(lg.grads.conv_bias[l])) {
      throw NumericError(conv_[l].id, "non-finite gradient");
    }
  }
  for (std::size_t d = 0; d < dense_.size(); ++d) {
    if (!finite(lg.grads.dense_weight[d].values()) || !finite(lg.grads.dense_bias[d])) {
      throw NumericError(dense_[d].id, "non-finite gradient");
    }
  }

  const float lr = options.learning_rate;
  for (std::size_t l = 0; l < conv_.size(); ++l) {
    ConvLayer& layer = conv_[l];
    auto w = layer.weight.values();
    const Tensor& g = lg.grads.conv_weight[l];
    auto it = extra_grads.find(layer.id);
    if (it != extra_grads.end()) {
      auto e = it->second.values();
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * (g[i] + e[i]);
    } else {
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
    }
    for (std::size_t i = 0; i < layer.bias.size(); ++i) layer.bias[i] -= lr * lg.grads.conv_bias[l][i];
  }
  for (std::size_t d = 0; d < dense_.size(); ++d) {
    DenseLayer& layer = dense_[d];
    const Tensor& g = lg.grads.dense_weight[d];
    for (std::size_t i = 0; i < layer.weight.size(); ++i) layer.weight[i] -= lr * g[i];
    for (std::size_t i = 0; i < layer.bias.size(); ++i) layer.bias[i] -= lr * lg.grads.dense_bias[d][i];
  }
  return lg.loss();
}

double Network::evaluate(const Dataset& dataset, std::size_t batch_size) const {
  if (dataset.count() == 0) throw UsageError("cannot evaluate on an empty dataset");
  batch_size = std::max<std::size_t>(batch_size, 1);
  std::size_t correct = 0;
  const std::size_t classes = this->classes();
  for (std::size_t begin = 0; begin < dataset.count(); begin += batch_size) {
    const std::size_t end = std::min(dataset.count(), begin + batch_size);
    Batch batch = dataset.slice(begin, end);
    Tensor logits = forward(batch.inputs);
    for (std::size_t s = 0; s < batch.size(); ++s) {
      if (static_cast<int>(argmax_row(logits.data() + s * classes, classes)) == batch.labels[s]) {
        ++correct;
      }
    }
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.count());
}

bool operator==(const Network& a, const Network& b) {
  if (a.name_ != b.name_ || a.in_channels_ != b.in_channels_ || a.in_height_ != b.in_height_ ||
      a.in_width_ != b.in_width_ || a.conv_.size() != b.conv_.size() ||
      a.dense_.size() != b.dense_.size()) {
    return false;
  }
  for (std::size_t l = 0; l < a.conv_.size(); ++l) {
    const auto &x = a.conv_[l], &y = b.conv_[l];
    if (x.id != y.id || x.padding != y.padding || x.pool != y.pool ||
        !x.weight.same_values(y.weight) || x.bias != y.bias) {
      return false;
    }
  }
  for (std::size_t d = 0; d < a.dense_.size(); ++d) {
    const auto &x = a.dense_[d], &y = b.dense_[d];
    if (x.id != y.id || !(x.weight == y.weight) || x.bias != y.bias) return false;
  }
  return true;
}

}  // namespace chanprune
