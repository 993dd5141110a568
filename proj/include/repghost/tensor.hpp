// Copyright (C) 2026 repghost-cpp authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace repghost {

enum class Layout { NCHW, NHWC };

std::string to_string(Layout layout);
Layout parse_layout(const std::string& text);

struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t count() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& shape);

/// splitmix64 stream. The sequence depends only on the seed, so it is
/// identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next();
  // Uniform in [-0.5, 0.5) with 24 bits of mantissa.
  float uniform_centered();
  float uniform(float lo, float hi);

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

/// Dense rank-4 float tensor. Indexing through at() is always logical
/// (n, c, y, x); the layout only decides the physical order of data().
class Tensor {
 public:
  Tensor() : Tensor(Shape{}) {}
  explicit Tensor(Shape shape, Layout layout = Layout::NCHW);
  Tensor(Shape shape, Layout layout, std::vector<float> data);

  static Tensor filled(Shape shape, float value, Layout layout = Layout::NCHW);

  const Shape& shape() const { return shape_; }
  Layout layout() const { return layout_; }
  std::size_t size() const { return data_.size(); }

  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }

  std::size_t offset(int n, int c, int y, int x) const {
    if (layout_ == Layout::NCHW) {
      return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
    }
    return ((static_cast<std::size_t>(n) * shape_.h + y) * shape_.w + x) * shape_.c + c;
  }

  float at(int n, int c, int y, int x) const { return data_[offset(n, c, y, x)]; }
  float& at(int n, int c, int y, int x) { return data_[offset(n, c, y, x)]; }

  bool operator==(const Tensor& other) const;

 private:
  Shape shape_;
  Layout layout_;
  std::vector<float> data_;
};

void validate_shape(const Shape& shape);

Tensor tensor_from_seed(Shape shape, Layout layout, std::uint64_t seed);
Tensor layout_convert(const Tensor& t, Layout target);

// Largest |a - b| over logical positions. Layouts may differ.
double max_abs_diff(const Tensor& a, const Tensor& b);

// Batch concatenation along n (same c, h, w); used to stack single-sample results.
Tensor stack_batch(std::span<const Tensor> parts);
Tensor slice_batch(const Tensor& t, int begin, int end);

}  // namespace repghost
