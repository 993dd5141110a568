// Copyright (C) 2026 repghost-cpp authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "oracle.hpp"
#include "repghost/error.hpp"
#include "repghost/init.hpp"
#include "repghost/ops.hpp"

using namespace repghost;

TEST_CASE("identity 1x1 conv returns its input") {
  const int c = 5;
  Conv2dParams p = Conv2dParams::zeros(c, c, 1);
  for (int i = 0; i < c; ++i) p.weight[p.weight_index(i, i, 0, 0)] = 1.0f;
  const Tensor x = tensor_from_seed(Shape{2, c, 4, 3}, Layout::NCHW, 1);
  CHECK(max_abs_diff(conv2d(x, p), x) == 0.0);
}

TEST_CASE("all-ones depthwise kernel sums receptive fields") {
  Conv2dParams p = Conv2dParams::zeros(1, 1, 3, 1, 1, 1);
  std::fill(p.weight.begin(), p.weight.end(), 1.0f);
  const Tensor y = conv2d(Tensor::filled(Shape{1, 1, 3, 3}, 1.0f), p);
  CHECK(y.at(0, 0, 1, 1) == 9.0f);
  CHECK(y.at(0, 0, 0, 0) == 4.0f);
  CHECK(y.at(0, 0, 0, 1) == 6.0f);
  CHECK(oracle::diff(y, oracle::conv(Tensor::filled(Shape{1, 1, 3, 3}, 1.0f), p)) == 0.0);
}

TEST_CASE("grouped conv decomposes into per-group convs") {
  Rng rng(5);
  const Conv2dParams g = random_conv(rng, 6, 4, 3, 1, 1, 2, true);
  const Tensor x = tensor_from_seed(Shape{1, 4, 8, 8}, Layout::NCHW, 3);
  Tensor halves[2];
  for (int grp = 0; grp < 2; ++grp) {
    Conv2dParams d = Conv2dParams::zeros(3, 2, 3, 1, 1, 1, true);
    for (int o = 0; o < 3; ++o) {
      d.bias[o] = g.bias[grp * 3 + o];
      for (int i = 0; i < 2; ++i) {
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) d.weight[d.weight_index(o, i, ky, kx)] = g.weight[g.weight_index(grp * 3 + o, i, ky, kx)];
        }
      }
    }
    halves[grp] = conv2d(slice_channels(x, grp * 2, grp * 2 + 2), d);
  }
  CHECK(max_abs_diff(conv2d(x, g), concat_channels(halves[0], halves[1])) <= 1e-6);
}

TEST_CASE("conv2d matches the naive oracle across strides, padding and groups") {
  Rng rng(11);
  struct Case {
    int cin, cout, k, stride, pad, groups;
  };
  const Case cases[] = {{3, 4, 3, 1, 1, 1}, {4, 4, 3, 2, 1, 4}, {4, 6, 1, 1, 0, 2},
                        {2, 3, 5, 2, 2, 1}, {8, 8, 5, 1, 2, 8}, {3, 2, 3, 3, 0, 1}};
  for (const Case& cs : cases) {
    const Conv2dParams p = random_conv(rng, cs.cout, cs.cin, cs.k, cs.stride, cs.pad, cs.groups, true);
    for (Layout layout : {Layout::NCHW, Layout::NHWC}) {
      const Tensor x = tensor_from_seed(Shape{2, cs.cin, 7, 6}, layout, 17);
      CHECK(oracle::diff(conv2d(x, p), oracle::conv(x, p)) <= 1e-5);
    }
  }
}

TEST_CASE("conv2d errors") {
  const Conv2dParams p = Conv2dParams::zeros(4, 3, 3);
  CHECK_THROWS_AS(conv2d(Tensor(Shape{1, 2, 5, 5}), p), ConfigError);
  CHECK_THROWS_AS(conv2d(Tensor(Shape{1, 3, 2, 2}), p), ShapeError);
  CHECK_THROWS_AS(Conv2dParams::zeros(4, 3, 3, 1, 1, 2), ConfigError);
}

TEST_CASE("conv2d output shape") {
  const Conv2dParams p = Conv2dParams::zeros(8, 4, 3, 2, 1);
  CHECK(p.output_shape(Shape{2, 4, 7, 8}) == Shape{2, 8, 4, 4});
}

TEST_CASE("batch_norm_infer closed forms") {
  const Tensor x = tensor_from_seed(Shape{1, 2, 3, 3}, Layout::NCHW, 4);
  BatchNormParams id = BatchNormParams::identity(2, 0.0f);
  CHECK(max_abs_diff(batch_norm_infer(x, id), x) == 0.0);

  BatchNormParams p{{2.0f}, {1.0f}, {3.0f}, {4.0f}, 0.0f};
  const Tensor y = batch_norm_infer(Tensor::filled(Shape{1, 1, 2, 2}, 5.0f), p);
  for (float v : y.data()) CHECK(v == 3.0f);

  BatchNormParams zero = BatchNormParams::identity(2);
  zero.gamma = {0.0f, 0.0f};
  zero.beta = {0.25f, -1.0f};
  const Tensor z = batch_norm_infer(x, zero);
  for (int yy = 0; yy < 3; ++yy) {
    CHECK(z.at(0, 0, yy, 1) == 0.25f);
    CHECK(z.at(0, 1, yy, 2) == -1.0f);
  }
  CHECK_THROWS_AS(batch_norm_infer(Tensor(Shape{1, 3, 2, 2}), id), ShapeError);
}

TEST_CASE("batch_norm_infer matches the oracle") {
  Rng rng(2);
  const BatchNormParams p = random_bn(rng, 6);
  const Tensor x = tensor_from_seed(Shape{2, 6, 5, 5}, Layout::NHWC, 8);
  CHECK(oracle::diff(batch_norm_infer(x, p), oracle::bn(x, p)) <= 1e-6);
}

TEST_CASE("elementwise ops") {
  const Tensor a = tensor_from_seed(Shape{1, 2, 4, 4}, Layout::NCHW, 1);
  const Tensor b = tensor_from_seed(Shape{1, 3, 4, 4}, Layout::NCHW, 2);
  CHECK(max_abs_diff(add_elementwise(a, Tensor(a.shape())), a) == 0.0);
  const Tensor cat = concat_channels(a, b);
  CHECK(cat.shape() == Shape{1, 5, 4, 4});
  CHECK(slice_channels(cat, 0, 2) == a);
  CHECK(slice_channels(cat, 2, 5) == b);

  const Tensor a2 = tensor_from_seed(Shape{1, 2, 4, 4}, Layout::NCHW, 3);
  CHECK(add_elementwise(a, a2) == add_elementwise(a2, a));
  CHECK_FALSE(concat_channels(a, a2) == concat_channels(a2, a));

  CHECK_THROWS_AS(add_elementwise(a, b), ShapeError);
  CHECK_THROWS_AS(concat_channels(a, Tensor(Shape{1, 2, 4, 3})), ShapeError);
  CHECK_THROWS_AS(concat_channels(a, layout_convert(a2, Layout::NHWC)), ShapeError);

  const Tensor r = relu(a);
  for (std::size_t i = 0; i < r.size(); ++i) CHECK(r.data()[i] == std::max(0.0f, a.data()[i]));
}

TEST_CASE("concat in NHWC keeps channel order") {
  const Tensor a = tensor_from_seed(Shape{2, 2, 3, 3}, Layout::NHWC, 1);
  const Tensor b = tensor_from_seed(Shape{2, 3, 3, 3}, Layout::NHWC, 2);
  const Tensor cat = concat_channels(a, b);
  const Tensor ref = concat_channels(layout_convert(a, Layout::NCHW), layout_convert(b, Layout::NCHW));
  CHECK(cat.layout() == Layout::NHWC);
  CHECK(max_abs_diff(cat, ref) == 0.0);
}

TEST_CASE("preallocated add and concat match the allocating versions") {
  for (Layout layout : {Layout::NCHW, Layout::NHWC}) {
    const Tensor a = tensor_from_seed(Shape{2, 3, 4, 4}, layout, 1);
    const Tensor b = tensor_from_seed(Shape{2, 3, 4, 4}, layout, 2);
    Tensor sum(a.shape(), layout);
    add_into(a, b, sum);
    CHECK(sum == add_elementwise(a, b));
    Tensor cat(Shape{2, 6, 4, 4}, layout);
    concat_into(a, b, cat);
    CHECK(cat == concat_channels(a, b));
    Tensor wrong(Shape{2, 5, 4, 4}, layout);
    CHECK_THROWS_AS(concat_into(a, b, wrong), ShapeError);
  }
}

TEST_CASE("global_avg_pool") {
  const Tensor k = global_avg_pool(Tensor::filled(Shape{2, 3, 5, 4}, 1.75f));
  CHECK(k.shape() == Shape{2, 3, 1, 1});
  for (float v : k.data()) CHECK(v == doctest::Approx(1.75f));
  const Tensor x(Shape{1, 1, 2, 2}, Layout::NCHW, {1, 2, 3, 4});
  CHECK(global_avg_pool(x).data()[0] == 2.5f);
  const Tensor once = global_avg_pool(tensor_from_seed(Shape{1, 4, 3, 3}, Layout::NCHW, 1));
  CHECK(global_avg_pool(once) == once);
}

TEST_CASE("hard_sigmoid") {
  const Tensor x(Shape{1, 3, 1, 1}, Layout::NCHW, {-3.0f, 3.0f, 0.0f});
  const Tensor y = hard_sigmoid(x);
  CHECK(y.data()[0] == 0.0f);
  CHECK(y.data()[1] == 1.0f);
  CHECK(y.data()[2] == 0.5f);
}

TEST_CASE("SE with zero weights halves the input") {
  SEParams p{Conv2dParams::zeros(4, 8, 1, 1, 0, 1, true), Conv2dParams::zeros(8, 4, 1, 1, 0, 1, true)};
  const Tensor x = tensor_from_seed(Shape{2, 8, 3, 3}, Layout::NCHW, 6);
  const Tensor y = se_forward(x, p);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.data()[i] == 0.5f * x.data()[i]);
}

TEST_CASE("SE with a saturated gate passes the input through") {
  SEParams p{Conv2dParams::zeros(4, 8, 1, 1, 0, 1, true), Conv2dParams::zeros(8, 4, 1, 1, 0, 1, true)};
  std::fill(p.expand.bias.begin(), p.expand.bias.end(), 10.0f);
  const Tensor x = tensor_from_seed(Shape{1, 8, 3, 3}, Layout::NHWC, 6);
  CHECK(se_forward(x, p) == x);
}

TEST_CASE("SE scales each channel by the independently computed gate") {
  Rng rng(21);
  const SEParams p = random_se(rng, 8, 4);
  const Tensor x = tensor_from_seed(Shape{2, 8, 4, 4}, Layout::NCHW, 13);
  const Tensor y = se_forward(x, p);
  for (int n = 0; n < 2; ++n) {
    const std::vector<double> gate = oracle::se_gate(x, p, n);
    for (int c = 0; c < 8; ++c) {
      CHECK(gate[c] >= 0.0);
      CHECK(gate[c] <= 1.0);
      CHECK(std::fabs(y.at(n, c, 1, 2) - gate[c] * x.at(n, c, 1, 2)) <= 1e-6);
    }
  }
  CHECK_THROWS_AS(se_forward(Tensor(Shape{1, 4, 2, 2}), p), ShapeError);
}

TEST_CASE("SE reduced width must be a multiple of 4") {
  SEParams p{Conv2dParams::zeros(6, 8, 1, 1, 0, 1, true), Conv2dParams::zeros(8, 6, 1, 1, 0, 1, true)};
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("operators are layout invariant") {
  Rng rng(3);
  const Conv2dParams conv = random_conv(rng, 6, 4, 3, 2, 1, 2, true);
  const BatchNormParams bn = random_bn(rng, 4);
  const SEParams se = random_se(rng, 4, 4);
  const Tensor x = tensor_from_seed(Shape{2, 4, 6, 5}, Layout::NCHW, 10);
  const Tensor xh = layout_convert(x, Layout::NHWC);
  CHECK(max_abs_diff(conv2d(x, conv), conv2d(xh, conv)) <= 1e-6);
  CHECK(conv2d(xh, conv).layout() == Layout::NHWC);
  CHECK(max_abs_diff(batch_norm_infer(x, bn), batch_norm_infer(xh, bn)) == 0.0);
  CHECK(max_abs_diff(se_forward(x, se), se_forward(xh, se)) <= 1e-6);
  CHECK(max_abs_diff(global_avg_pool(x), global_avg_pool(xh)) <= 1e-7);
  CHECK(max_abs_diff(relu(x), relu(xh)) == 0.0);
}
