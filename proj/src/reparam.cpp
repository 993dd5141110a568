// Copyright (C) 2026 repghost-cpp authors
// SPDX-License-Identifier: Apache-2.0

#include "repghost/reparam.hpp"

#include <algorithm>
#include <cmath>

#include "repghost/error.hpp"
#include "repghost/init.hpp"

namespace repghost {

namespace {

// Depthwise k x k kernel plus bias held in double while branches are merged.
struct DepthwiseAccumulator {
  int channels;
  int k;
  std::vector<double> weight;
  std::vector<double> bias;

  DepthwiseAccumulator(int c, int kernel)
      : channels(c), k(kernel), weight(static_cast<std::size_t>(c) * kernel * kernel, 0.0), bias(c, 0.0) {}

  double& tap(int c, int ky, int kx) { return weight[(static_cast<std::size_t>(c) * k + ky) * k + kx]; }

  Conv2dParams to_conv() const {
    Conv2dParams p = Conv2dParams::zeros(channels, channels, k, 1, k / 2, channels, true);
    std::transform(weight.begin(), weight.end(), p.weight.begin(), [](double v) { return static_cast<float>(v); });
    std::transform(bias.begin(), bias.end(), p.bias.begin(), [](double v) { return static_cast<float>(v); });
    return p;
  }
};

std::vector<double> bn_scale(const BatchNormParams& bn) {
  std::vector<double> s(bn.channels());
  for (int c = 0; c < bn.channels(); ++c) {
    s[c] = static_cast<double>(bn.gamma[c]) / std::sqrt(static_cast<double>(bn.running_var[c]) + bn.eps);
  }
  return s;
}

// Adds bn(conv(x)) for a depthwise conv of odd size <= acc.k, centered.
void accumulate_conv_bn(DepthwiseAccumulator& acc, const Conv2dParams& conv, const BatchNormParams& bn) {
  const std::vector<double> scale = bn_scale(bn);
  const int off = (acc.k - conv.kernel_h) / 2;
  for (int c = 0; c < acc.channels; ++c) {
    for (int ky = 0; ky < conv.kernel_h; ++ky) {
      for (int kx = 0; kx < conv.kernel_w; ++kx) {
        acc.tap(c, ky + off, kx + off) += scale[c] * conv.weight[conv.weight_index(c, 0, ky, kx)];
      }
    }
    const double b = conv.has_bias() ? conv.bias[c] : 0.0;
    acc.bias[c] += bn.beta[c] + scale[c] * (b - bn.running_mean[c]);
  }
}

void accumulate_bn(DepthwiseAccumulator& acc, const BatchNormParams& bn) {
  const std::vector<double> scale = bn_scale(bn);
  const int mid = acc.k / 2;
  for (int c = 0; c < acc.channels; ++c) {
    acc.tap(c, mid, mid) += scale[c];
    acc.bias[c] += bn.beta[c] - scale[c] * bn.running_mean[c];
  }
}

void accumulate_identity(DepthwiseAccumulator& acc) {
  const int mid = acc.k / 2;
  for (int c = 0; c < acc.channels; ++c) acc.tap(c, mid, mid) += 1.0;
}

void check_depthwise(const Conv2dParams& conv, int channels, int k, const char* what) {
  conv.validate();
  if (!conv.is_depthwise() || conv.in_channels != channels || conv.kernel_h != k || conv.kernel_w != k ||
      conv.stride != 1 || conv.padding != k / 2) {
    throw ConfigError(std::string("repghost module: ") + what + " must be a stride-1 depthwise " +
                      std::to_string(k) + "x" + std::to_string(k) + " conv over " + std::to_string(channels) +
                      " channels");
  }
}

Branch make_branch(Rng& rng, BranchKind kind, int channels) {
  Branch b;
  b.kind = kind;
  switch (kind) {
    case BranchKind::Dconv3x3Bn:
      b.conv = random_conv(rng, channels, channels, 3, 1, 1, channels);
      b.bn = random_bn(rng, channels);
      break;
    case BranchKind::Dconv1x1Bn:
      b.conv = random_conv(rng, channels, channels, 1, 1, 0, channels);
      b.bn = random_bn(rng, channels);
      break;
    case BranchKind::BnOnly:
      b.bn = random_bn(rng, channels);
      break;
    case BranchKind::Identity:
      break;
  }
  return b;
}

}  // namespace

std::string to_string(BranchKind kind) {
  switch (kind) {
    case BranchKind::Dconv3x3Bn: return "dconv3x3_bn";
    case BranchKind::Identity: return "identity";
    case BranchKind::BnOnly: return "bn";
    case BranchKind::Dconv1x1Bn: return "dconv1x1_bn";
  }
  return "?";
}

ReparamVariant default_variant() {
  return ReparamVariant{"bn", false, false, true, false};
}

std::vector<ReparamVariant> ablation_variants() {
  return {
      {"no-reparam", false, false, false, false},
      {"id", true, false, false, false},
      {"1x1dconv", false, true, false, false},
      {"bn", false, false, true, false},
      {"1x1dconv+bn", false, true, true, false},
      {"id+1x1dconv+bn", true, true, true, false},
      {"+relu", false, false, true, true},
  };
}

void RepGhostModuleTrain::validate() const {
  primary.validate();
  if (primary.kernel_h != 1 || primary.kernel_w != 1 || primary.groups != 1 || primary.stride != 1 ||
      primary.padding != 0) {
    throw ConfigError("repghost module: primary must be a dense stride-1 1x1 conv");
  }
  primary_bn.validate();
  const int c = out_channels();
  if (primary_bn.channels() != c) throw ConfigError("repghost module: primary BN width mismatch");

  int counts[4] = {0, 0, 0, 0};
  for (const Branch& b : branches) {
    ++counts[static_cast<int>(b.kind)];
    switch (b.kind) {
      case BranchKind::Dconv3x3Bn:
      case BranchKind::Dconv1x1Bn:
        if (!b.conv || !b.bn) throw ConfigError("repghost module: depthwise branch needs conv and BN");
        check_depthwise(*b.conv, c, b.kind == BranchKind::Dconv3x3Bn ? 3 : 1, to_string(b.kind).c_str());
        break;
      case BranchKind::BnOnly:
        if (!b.bn) throw ConfigError("repghost module: BN branch without BN parameters");
        break;
      case BranchKind::Identity:
        break;
    }
    if (b.bn) {
      b.bn->validate();
      if (b.bn->channels() != c) throw ConfigError("repghost module: branch BN width mismatch");
    }
  }
  if (counts[static_cast<int>(BranchKind::Dconv3x3Bn)] != 1) {
    throw ConfigError("repghost module: branch set must contain the 3x3 depthwise branch exactly once");
  }
  for (int n : counts) {
    if (n > 1) throw ConfigError("repghost module: duplicate branch kind");
  }
}

void RepGhostModuleDeploy::validate() const {
  primary.validate();
  if (primary.kernel_h != 1 || primary.kernel_w != 1 || primary.groups != 1) {
    throw ConfigError("repghost deploy module: primary must be a dense 1x1 conv");
  }
  check_depthwise(fused_dconv, out_channels(), 3, "fused dconv");
}

RepGhostModuleTrain make_repghost_module(Rng& rng, int in_channels, int out_channels, const ReparamVariant& variant,
                                         bool relu) {
  RepGhostModuleTrain m;
  m.primary = random_conv(rng, out_channels, in_channels, 1);
  m.primary_bn = random_bn(rng, out_channels);
  m.primary_relu = relu;
  m.final_relu = relu;
  m.dconv_relu = variant.dconv_relu;
  m.branches.push_back(make_branch(rng, BranchKind::Dconv3x3Bn, out_channels));
  if (variant.dconv1x1) m.branches.push_back(make_branch(rng, BranchKind::Dconv1x1Bn, out_channels));
  if (variant.bn) m.branches.push_back(make_branch(rng, BranchKind::BnOnly, out_channels));
  if (variant.identity) m.branches.push_back(make_branch(rng, BranchKind::Identity, out_channels));
  return m;
}

Conv2dParams fold_bn_into_conv(const Conv2dParams& conv, const BatchNormParams& bn) {
  conv.validate();
  bn.validate();
  if (bn.channels() != conv.out_channels) {
    throw ConfigError("fold_bn_into_conv: BN has " + std::to_string(bn.channels()) + " channels, conv produces " +
                      std::to_string(conv.out_channels));
  }
  const std::vector<double> scale = bn_scale(bn);
  Conv2dParams out = conv;
  out.bias.assign(conv.out_channels, 0.0f);
  const std::size_t per_out = conv.weight_count() / conv.out_channels;
  for (int o = 0; o < conv.out_channels; ++o) {
    for (std::size_t i = 0; i < per_out; ++i) {
      const std::size_t idx = o * per_out + i;
      out.weight[idx] = static_cast<float>(scale[o] * conv.weight[idx]);
    }
    const double b = conv.has_bias() ? conv.bias[o] : 0.0;
    out.bias[o] = static_cast<float>(bn.beta[o] + scale[o] * (b - bn.running_mean[o]));
  }
  return out;
}

Conv2dParams bn_to_depthwise_kernel(const BatchNormParams& bn, int k) {
  if (k < 1 || k % 2 == 0) throw ConfigError("bn_to_depthwise_kernel: kernel size must be odd, got " + std::to_string(k));
  bn.validate();
  DepthwiseAccumulator acc(bn.channels(), k);
  accumulate_bn(acc, bn);
  return acc.to_conv();
}

Conv2dParams pad_kernel_to(const Conv2dParams& conv, int k) {
  conv.validate();
  if (k % 2 == 0 || conv.kernel_h % 2 == 0 || conv.kernel_w % 2 == 0) {
    throw ConfigError("pad_kernel_to: kernel sizes must be odd");
  }
  if (conv.kernel_h > k || conv.kernel_w > k) {
    throw ConfigError("pad_kernel_to: kernel " + std::to_string(conv.kernel_h) + "x" + std::to_string(conv.kernel_w) +
                      " larger than target " + std::to_string(k));
  }
  Conv2dParams out = conv;
  out.kernel_h = k;
  out.kernel_w = k;
  out.padding = conv.padding + (k - conv.kernel_h) / 2;
  out.weight.assign(out.weight_count(), 0.0f);
  const int oy = (k - conv.kernel_h) / 2;
  const int ox = (k - conv.kernel_w) / 2;
  for (int o = 0; o < conv.out_channels; ++o) {
    for (int i = 0; i < conv.in_per_group(); ++i) {
      for (int ky = 0; ky < conv.kernel_h; ++ky) {
        for (int kx = 0; kx < conv.kernel_w; ++kx) {
          out.weight[out.weight_index(o, i, ky + oy, kx + ox)] = conv.weight[conv.weight_index(o, i, ky, kx)];
        }
      }
    }
  }
  return out;
}

RepGhostModuleDeploy fuse_module(const RepGhostModuleTrain& m) {
  m.validate();
  if (m.dconv_relu) {
    throw ConfigError("fuse_module: a ReLU inside the depthwise branch is non-linear; the module cannot be fused");
  }
  const int c = m.out_channels();
  DepthwiseAccumulator acc(c, 3);
  for (const Branch& b : m.branches) {
    switch (b.kind) {
      case BranchKind::Dconv3x3Bn:
      case BranchKind::Dconv1x1Bn:
        accumulate_conv_bn(acc, *b.conv, *b.bn);
        break;
      case BranchKind::BnOnly:
        accumulate_bn(acc, *b.bn);
        break;
      case BranchKind::Identity:
        accumulate_identity(acc);
        break;
    }
  }
  RepGhostModuleDeploy d;
  d.primary = fold_bn_into_conv(m.primary, m.primary_bn);
  d.primary_relu = m.primary_relu;
  d.fused_dconv = acc.to_conv();
  d.final_relu = m.final_relu;
  return d;
}

RepGhostModuleTrain as_train_form(const RepGhostModuleDeploy& d) {
  d.validate();
  // eps = 0 with unit variance keeps every BN an exact identity
  RepGhostModuleTrain m;
  m.primary = d.primary;
  m.primary_bn = BatchNormParams::identity(d.out_channels(), 0.0f);
  m.primary_relu = d.primary_relu;
  m.final_relu = d.final_relu;
  Branch b;
  b.kind = BranchKind::Dconv3x3Bn;
  b.conv = d.fused_dconv;
  b.bn = BatchNormParams::identity(d.out_channels(), 0.0f);
  m.branches.push_back(std::move(b));
  return m;
}

Tensor forward_train(const RepGhostModuleTrain& m, const Tensor& x) {
  m.validate();
  if (x.shape().c != m.in_channels()) {
    throw ShapeError("repghost module: input has " + std::to_string(x.shape().c) + " channels, expected " +
                     std::to_string(m.in_channels()));
  }
  Tensor y = batch_norm_infer(conv2d(x, m.primary), m.primary_bn);
  if (m.primary_relu) relu_inplace(y);

  Tensor sum(y.shape(), y.layout());
  for (const Branch& b : m.branches) {
    Tensor out;
    switch (b.kind) {
      case BranchKind::Dconv3x3Bn:
        out = batch_norm_infer(conv2d(y, *b.conv), *b.bn);
        if (m.dconv_relu) relu_inplace(out);
        break;
      case BranchKind::Dconv1x1Bn:
        out = batch_norm_infer(conv2d(y, *b.conv), *b.bn);
        break;
      case BranchKind::BnOnly:
        out = batch_norm_infer(y, *b.bn);
        break;
      case BranchKind::Identity:
        out = y;
        break;
    }
    add_into(sum, out, sum);
  }
  if (m.final_relu) relu_inplace(sum);
  return sum;
}

Tensor forward_deploy(const RepGhostModuleDeploy& m, const Tensor& x) {
  if (x.shape().c != m.in_channels()) {
    throw ShapeError("repghost module: input has " + std::to_string(x.shape().c) + " channels, expected " +
                     std::to_string(m.in_channels()));
  }
  Tensor y = conv2d(x, m.primary);
  if (m.primary_relu) relu_inplace(y);
  y = conv2d(y, m.fused_dconv);
  if (m.final_relu) relu_inplace(y);
  return y;
}

EquivalenceReport verify_equivalence(const ForwardFn& reference, const ForwardFn& candidate, Shape input, int trials,
                                     double tolerance, std::uint64_t seed) {
  if (trials < 1) throw ConfigError("verify_equivalence: trials must be >= 1");
  EquivalenceReport report;
  report.trials = trials;
  report.tolerance = tolerance;
  for (int t = 0; t < trials; ++t) {
    const Tensor x = tensor_from_seed(input, Layout::NCHW, seed + static_cast<std::uint64_t>(t));
    const Tensor a = reference(x);
    const Tensor b = candidate(x);
    if (!(a.shape() == b.shape())) {
      throw ConfigError("verify_equivalence: forms produce different shapes " + to_string(a.shape()) + " vs " +
                        to_string(b.shape()));
    }
    report.max_diff = std::max(report.max_diff, max_abs_diff(a, b));
  }
  report.passed = report.max_diff <= tolerance;
  return report;
}

EquivalenceReport verify_equivalence(const RepGhostModuleTrain& train, const RepGhostModuleDeploy& deploy,
                                     Shape input, int trials, double tolerance, std::uint64_t seed) {
  if (train.in_channels() != deploy.in_channels() || train.out_channels() != deploy.out_channels()) {
    throw ConfigError("verify_equivalence: train form is " + std::to_string(train.in_channels()) + "->" +
                      std::to_string(train.out_channels()) + ", deploy form is " +
                      std::to_string(deploy.in_channels()) + "->" + std::to_string(deploy.out_channels()));
  }
  if (input.c != train.in_channels()) throw ConfigError("verify_equivalence: input channels do not match the module");
  return verify_equivalence([&](const Tensor& x) { return forward_train(train, x); },
                            [&](const Tensor& x) { return forward_deploy(deploy, x); }, input, trials, tolerance,
                            seed);
}

}  // namespace repghost
