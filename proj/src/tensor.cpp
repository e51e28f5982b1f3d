// Copyright 2026 The chanprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "chanprune/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "chanprune/errors.hpp"

namespace chanprune {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape, float fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_)) {
    throw DimensionError("tensor data has " + std::to_string(data_.size()) +
                         " values but shape " + shape_string(shape_) + " needs " +
                         std::to_string(shape_size(shape_)));
  }
}

void Tensor::fill(float value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](float v) { return std::isfinite(v); });
}

FilterTensor::FilterTensor(std::string layer_id, std::size_t n_out, std::size_t n_in,
                           std::size_t kh, std::size_t kw, float fill)
    : FilterTensor(std::move(layer_id), Tensor({n_out, n_in, kh, kw}, fill)) {}

FilterTensor::FilterTensor(std::string layer_id, Tensor data)
    : layer_id_(std::move(layer_id)), data_(std::move(data)) {
  if (data_.rank() != 4) {
    throw DimensionError("filter tensor for " + layer_id_ + " must be 4-D, got " +
                         shape_string(data_.shape()));
  }
  for (std::size_t d : data_.shape()) {
    if (d == 0) {
      throw DimensionError("filter tensor for " + layer_id_ + " has a zero extent " +
                           shape_string(data_.shape()));
    }
  }
}

std::span<float> FilterTensor::filter(std::size_t j) {
  const std::size_t fs = filter_size();
  return data_.values().subspan(j * fs, fs);
}

std::span<const float> FilterTensor::filter(std::size_t j) const {
  const std::size_t fs = filter_size();
  return data_.values().subspan(j * fs, fs);
}

void require_same_shape(const Shape& a, const Shape& b, const std::string& what) {
  if (a != b) {
    throw DimensionError(what + ": shape " + shape_string(a) + " vs " + shape_string(b));
  }
}

double squared_norm(std::span<const float> values) {
  double acc = 0.0;
  for (float v : values) acc += static_cast<double>(v) * v;
  return acc;
}

double squared_distance(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    acc += d * d;
  }
  return acc;
}

}  // namespace chanprune
