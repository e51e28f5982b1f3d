// Copyright 2026 The chanprune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CHANPRUNE_TENSOR_HPP_
#define CHANPRUNE_TENSOR_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace chanprune {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major float tensor of arbitrary rank.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<float> values() noexcept { return data_; }
  std::span<const float> values() const noexcept { return data_; }
  float* data() noexcept { return data_.data(); }
  const float* data() const noexcept { return data_.data(); }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  void fill(float value);
  bool all_finite() const;

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

/// Weights of one conv layer, shape [n_out, n_in, kh, kw]. Filter j is the
/// contiguous 3-D slice starting at j * filter_size().
class FilterTensor {
 public:
  FilterTensor() = default;
  FilterTensor(std::string layer_id, std::size_t n_out, std::size_t n_in,
               std::size_t kh, std::size_t kw, float fill = 0.0f);
  /// Wraps an existing 4-D tensor; throws DimensionError on bad rank or
  /// a zero extent.
  FilterTensor(std::string layer_id, Tensor data);

  const std::string& layer_id() const noexcept { return layer_id_; }
  const Tensor& tensor() const noexcept { return data_; }
  Tensor& tensor() noexcept { return data_; }
  const Shape& shape() const noexcept { return data_.shape(); }

  std::size_t n_out() const { return data_.dim(0); }
  std::size_t n_in() const { return data_.dim(1); }
  std::size_t kh() const { return data_.dim(2); }
  std::size_t kw() const { return data_.dim(3); }
  std::size_t filter_size() const { return n_in() * kh() * kw(); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<float> filter(std::size_t j);
  std::span<const float> filter(std::size_t j) const;

  std::span<float> values() noexcept { return data_.values(); }
  std::span<const float> values() const noexcept { return data_.values(); }
  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  bool all_finite() const { return data_.all_finite(); }

  /// Equality of values and shape; the layer id is not compared.
  bool same_values(const FilterTensor& other) const { return data_ == other.data_; }

 private:
  std::string layer_id_;
  Tensor data_;
};

/// Throws DimensionError naming `what` if the shapes differ.
void require_same_shape(const Shape& a, const Shape& b, const std::string& what);

/// Squared Frobenius norm, accumulated in double.
double squared_norm(std::span<const float> values);
/// Squared Frobenius norm of a - b, accumulated in double.
double squared_distance(std::span<const float> a, std::span<const float> b);

}  // namespace chanprune

#endif  // CHANPRUNE_TENSOR_HPP_
