// Copyright (C) 2026 repghost-cpp authors
// SPDX-License-Identifier: Apache-2.0

#include "repghost/tensor.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <utility>

#include "repghost/error.hpp"

namespace repghost {

std::string to_string(Layout layout) {
  return layout == Layout::NCHW ? "nchw" : "nhwc";
}

Layout parse_layout(const std::string& text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (lower == "nchw") return Layout::NCHW;
  if (lower == "nhwc") return Layout::NHWC;
  throw ConfigError("unknown layout '" + text + "'");
}

std::string to_string(const Shape& shape) {
  return "(" + std::to_string(shape.n) + "," + std::to_string(shape.c) + "," + std::to_string(shape.h) + "," +
         std::to_string(shape.w) + ")";
}

std::uint64_t Rng::next() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

float Rng::uniform_centered() {
  // top 24 bits -> [0, 1) exactly representable in float
  const auto bits = static_cast<std::uint32_t>(next() >> 40);
  return static_cast<float>(bits) * (1.0f / 16777216.0f) - 0.5f;
}

float Rng::uniform(float lo, float hi) {
  return lo + (uniform_centered() + 0.5f) * (hi - lo);
}

void validate_shape(const Shape& shape) {
  if (shape.n < 1 || shape.c < 1 || shape.h < 1 || shape.w < 1) {
    throw ShapeError("invalid shape " + to_string(shape) + ": every dimension must be >= 1");
  }
}

Tensor::Tensor(Shape shape, Layout layout) : shape_(shape), layout_(layout) {
  validate_shape(shape_);
  data_.assign(shape_.count(), 0.0f);
}

Tensor::Tensor(Shape shape, Layout layout, std::vector<float> data)
    : shape_(shape), layout_(layout), data_(std::move(data)) {
  validate_shape(shape_);
  if (data_.size() != shape_.count()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                     to_string(shape_));
  }
}

Tensor Tensor::filled(Shape shape, float value, Layout layout) {
  Tensor t(shape, layout);
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

bool Tensor::operator==(const Tensor& other) const {
  return shape_ == other.shape_ && layout_ == other.layout_ && data_ == other.data_;
}

Tensor tensor_from_seed(Shape shape, Layout layout, std::uint64_t seed) {
  Tensor t(shape, layout);
  Rng rng(seed);
  for (float& v : t.data()) v = rng.uniform_centered();
  return t;
}

Tensor layout_convert(const Tensor& t, Layout target) {
  if (t.layout() == target) return t;
  const Shape& s = t.shape();
  Tensor out(s, target);
  const auto src = t.data();
  auto dst = out.data();
  const std::size_t hw = static_cast<std::size_t>(s.h) * s.w;
  for (int n = 0; n < s.n; ++n) {
    const std::size_t base = static_cast<std::size_t>(n) * s.c * hw;
    for (int c = 0; c < s.c; ++c) {
      for (std::size_t p = 0; p < hw; ++p) {
        const std::size_t nchw = base + c * hw + p;
        const std::size_t nhwc = base + p * s.c + c;
        if (target == Layout::NHWC) {
          dst[nhwc] = src[nchw];
        } else {
          dst[nchw] = src[nhwc];
        }
      }
    }
  }
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError("max_abs_diff: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  Tensor converted;
  if (b.layout() != a.layout()) converted = layout_convert(b, a.layout());
  const auto da = a.data();
  const auto db = b.layout() == a.layout() ? b.data() : std::as_const(converted).data();
  double worst = 0.0;
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = std::fabs(static_cast<double>(da[i]) - static_cast<double>(db[i]));
    // NaN must never compare as "equal"
    if (!(d <= worst)) worst = std::isnan(d) ? INFINITY : d;
  }
  return worst;
}

Tensor stack_batch(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("stack_batch: no tensors");
  Shape s = parts.front().shape();
  const Layout layout = parts.front().layout();
  int total = 0;
  for (const Tensor& p : parts) {
    if (p.shape().c != s.c || p.shape().h != s.h || p.shape().w != s.w || p.layout() != layout) {
      throw ShapeError("stack_batch: incompatible tensors");
    }
    total += p.shape().n;
  }
  s.n = total;
  std::vector<float> data;
  data.reserve(s.count());
  // both layouts keep n outermost, so per-sample blocks are contiguous
  for (const Tensor& p : parts) data.insert(data.end(), p.data().begin(), p.data().end());
  return Tensor(s, layout, std::move(data));
}

Tensor slice_batch(const Tensor& t, int begin, int end) {
  const Shape& s = t.shape();
  if (begin < 0 || end > s.n || begin >= end) throw ShapeError("slice_batch: bad range");
  const std::size_t per = static_cast<std::size_t>(s.c) * s.h * s.w;
  std::vector<float> data(t.data().begin() + begin * per, t.data().begin() + end * per);
  return Tensor(Shape{end - begin, s.c, s.h, s.w}, t.layout(), std::move(data));
}

}  // namespace repghost
