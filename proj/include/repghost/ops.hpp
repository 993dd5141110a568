// Copyright (C) 2026 repghost-cpp authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "repghost/tensor.hpp"

namespace repghost {

/// Convolution weights laid out as [out][in / groups][kh][kw]. An empty
/// bias vector means the layer has no bias.
struct Conv2dParams {
  int out_channels = 1;
  int in_channels = 1;
  int kernel_h = 1;
  int kernel_w = 1;
  int stride = 1;
  int padding = 0;
  int groups = 1;
  std::vector<float> weight;
  std::vector<float> bias;

  static Conv2dParams zeros(int out_channels, int in_channels, int kernel, int stride = 1, int padding = 0,
                            int groups = 1, bool with_bias = false);

  int in_per_group() const { return in_channels / groups; }
  int out_per_group() const { return out_channels / groups; }
  bool has_bias() const { return !bias.empty(); }
  bool is_depthwise() const { return groups == in_channels && groups == out_channels; }
  std::size_t weight_count() const {
    return static_cast<std::size_t>(out_channels) * in_per_group() * kernel_h * kernel_w;
  }
  std::size_t weight_index(int o, int i, int ky, int kx) const {
    return ((static_cast<std::size_t>(o) * in_per_group() + i) * kernel_h + ky) * kernel_w + kx;
  }

  // Throws ConfigError when groups, sizes or vector lengths are inconsistent.
  void validate() const;
  Shape output_shape(const Shape& input) const;
};

struct BatchNormParams {
  std::vector<float> gamma;
  std::vector<float> beta;
  std::vector<float> running_mean;
  std::vector<float> running_var;
  float eps = 1e-5f;

  // gamma = 1, beta = 0, mean = 0, var = 1.
  static BatchNormParams identity(int channels, float eps = 1e-5f);

  int channels() const { return static_cast<int>(gamma.size()); }
  void validate() const;
};

/// Squeeze-and-excitation: pool -> 1x1 reduce -> ReLU -> 1x1 expand -> hard sigmoid.
struct SEParams {
  Conv2dParams reduce;
  Conv2dParams expand;

  int channels() const { return reduce.in_channels; }
  int reduced_channels() const { return reduce.out_channels; }
  void validate() const;
};

Tensor conv2d(const Tensor& x, const Conv2dParams& p);
Tensor batch_norm_infer(const Tensor& x, const BatchNormParams& p);
Tensor relu(const Tensor& x);
Tensor add_elementwise(const Tensor& a, const Tensor& b);
Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor slice_channels(const Tensor& x, int begin, int end);
Tensor global_avg_pool(const Tensor& x);
Tensor hard_sigmoid(const Tensor& x);
// x scaled per (n, c) by gate of shape (n, c, 1, 1).
Tensor scale_channels(const Tensor& x, const Tensor& gate);
Tensor se_forward(const Tensor& x, const SEParams& p);

// Write-into variants used by the benchmark so the timed region allocates
// nothing. `out` must already have the result shape and the inputs' layout.
void add_into(const Tensor& a, const Tensor& b, Tensor& out);
void concat_into(const Tensor& a, const Tensor& b, Tensor& out);
void relu_inplace(Tensor& x);

}  // namespace repghost
