// Copyright (C) 2026 repghost-cpp authors
// SPDX-License-Identifier: Apache-2.0

#include "repghost/init.hpp"

#include <cmath>

namespace repghost {

Conv2dParams random_conv(Rng& rng, int out_channels, int in_channels, int kernel, int stride, int padding, int groups,
                         bool with_bias) {
  Conv2dParams p = Conv2dParams::zeros(out_channels, in_channels, kernel, stride, padding, groups, with_bias);
  const int fan_in = p.in_per_group() * kernel * kernel;
  // uniform(-b, b) has variance b^2 / 3
  const float bound = std::sqrt(3.0f / static_cast<float>(fan_in));
  for (float& w : p.weight) w = rng.uniform(-bound, bound);
  for (float& b : p.bias) b = rng.uniform(-0.1f, 0.1f);
  return p;
}

BatchNormParams random_bn(Rng& rng, int channels, float eps) {
  BatchNormParams p;
  p.eps = eps;
  p.gamma.resize(channels);
  p.beta.resize(channels);
  p.running_mean.resize(channels);
  p.running_var.resize(channels);
  for (int c = 0; c < channels; ++c) {
    p.gamma[c] = rng.uniform(0.5f, 1.5f);
    p.beta[c] = rng.uniform(-0.2f, 0.2f);
    p.running_mean[c] = rng.uniform(-0.2f, 0.2f);
    p.running_var[c] = rng.uniform(0.5f, 1.5f);
  }
  return p;
}

SEParams random_se(Rng& rng, int channels, int reduced_channels) {
  SEParams p;
  p.reduce = random_conv(rng, reduced_channels, channels, 1, 1, 0, 1, true);
  p.expand = random_conv(rng, channels, reduced_channels, 1, 1, 0, 1, true);
  return p;
}

}  // namespace repghost
