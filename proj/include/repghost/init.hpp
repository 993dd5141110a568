// Copyright (C) 2026 repghost-cpp authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "repghost/ops.hpp"
#include "repghost/tensor.hpp"

namespace repghost {

// Seeded parameter initialization. Weights are uniform with variance 1/fan_in
// so activations stay O(1) through a deep stack; batch-norm statistics are
// randomized around identity so fusion tests exercise every term.
Conv2dParams random_conv(Rng& rng, int out_channels, int in_channels, int kernel, int stride = 1, int padding = 0,
                         int groups = 1, bool with_bias = false);
BatchNormParams random_bn(Rng& rng, int channels, float eps = 1e-5f);
SEParams random_se(Rng& rng, int channels, int reduced_channels);

}  // namespace repghost
