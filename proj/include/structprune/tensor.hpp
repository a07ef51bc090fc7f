/* Copyright 2026 The StructPrune Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef STRUCTPRUNE_TENSOR_HPP_
#define STRUCTPRUNE_TENSOR_HPP_

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "structprune/error.hpp"

namespace structprune {

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1},
                         std::multiplies<>());
}

std::string shape_to_string(const Shape& shape);

// Dense row-major tensor. Parameters are stored as float; activations and
// gradients inside the executor use double.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape)
      : shape_(std::move(shape)),
        data_(static_cast<std::size_t>(shape_numel(shape_)), T{0}) {
    check_shape();
  }
  BasicTensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape();
    if (static_cast<std::int64_t>(data_.size()) != shape_numel(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_to_string(shape_));
    }
  }

  const Shape& shape() const { return shape_; }
  std::int64_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t rank() const { return shape_.size(); }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  bool all_finite() const {
    for (const T& v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  template <typename U>
  BasicTensor<U> cast() const {
    return BasicTensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

 private:
  void check_shape() const {
    for (std::int64_t e : shape_) {
      if (e <= 0) {
        throw ShapeError("tensor extents must be positive, got " +
                         shape_to_string(shape_));
      }
    }
  }

  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

// Gathers `keep` indices along `axis`, leaving all other axes untouched.
template <typename T>
BasicTensor<T> gather_axis(const BasicTensor<T>& src, std::size_t axis,
                           std::span<const std::int64_t> keep) {
  const Shape& shape = src.shape();
  if (axis >= shape.size()) throw ShapeError("gather axis out of range");
  std::int64_t outer = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= shape[a];
  std::int64_t inner = 1;
  for (std::size_t a = axis + 1; a < shape.size(); ++a) inner *= shape[a];
  const std::int64_t extent = shape[axis];

  Shape out_shape = shape;
  out_shape[axis] = static_cast<std::int64_t>(keep.size());
  std::vector<T> out;
  out.reserve(static_cast<std::size_t>(outer * out_shape[axis] * inner));
  const auto& in = src.storage();
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t k : keep) {
      const auto base = static_cast<std::size_t>((o * extent + k) * inner);
      out.insert(out.end(), in.begin() + static_cast<std::ptrdiff_t>(base),
                 in.begin() + static_cast<std::ptrdiff_t>(base + inner));
    }
  }
  return BasicTensor<T>(std::move(out_shape), std::move(out));
}

// Calls fn(flat_index) for every element of slice `k` along `axis`.
template <typename Fn>
void for_each_in_slice(const Shape& shape, std::size_t axis, std::int64_t k,
                       Fn&& fn) {
  std::int64_t outer = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= shape[a];
  std::int64_t inner = 1;
  for (std::size_t a = axis + 1; a < shape.size(); ++a) inner *= shape[a];
  const std::int64_t extent = shape[axis];
  for (std::int64_t o = 0; o < outer; ++o) {
    const std::int64_t base = (o * extent + k) * inner;
    for (std::int64_t i = 0; i < inner; ++i) fn(base + i);
  }
}

}  // namespace structprune

#endif  // STRUCTPRUNE_TENSOR_HPP_
