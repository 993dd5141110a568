// Copyright (C) 2026 repghost-cpp authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "repghost/ops.hpp"
#include "repghost/tensor.hpp"

namespace repghost {

enum class BranchKind { Dconv3x3Bn, Identity, BnOnly, Dconv1x1Bn };

std::string to_string(BranchKind kind);

/// One parallel branch applied to the primary output. `conv` is present for
/// the two depthwise kinds, `bn` for everything except Identity.
struct Branch {
  BranchKind kind = BranchKind::Dconv3x3Bn;
  std::optional<Conv2dParams> conv;
  std::optional<BatchNormParams> bn;
};

/// Which optional branches sit next to the mandatory 3x3 depthwise + BN.
/// `dconv_relu` puts a ReLU right after that depthwise branch, which makes
/// the module impossible to collapse into a single depthwise conv.
struct ReparamVariant {
  std::string name;
  bool identity = false;
  bool dconv1x1 = false;
  bool bn = true;
  bool dconv_relu = false;

  bool fusible() const { return !dconv_relu; }
};

// Default branch set: 3x3 depthwise + BN next to a BN-only branch.
ReparamVariant default_variant();
// All supported branch sets by name: no-reparam, id, 1x1dconv, bn,
// 1x1dconv+bn, id+1x1dconv+bn, and the unfusible +relu.
std::vector<ReparamVariant> ablation_variants();

/// Training-time module: 1x1 conv + BN (+ReLU) producing the reused
/// feature, then a sum over parallel branches and an optional ReLU.
struct RepGhostModuleTrain {
  Conv2dParams primary;
  BatchNormParams primary_bn;
  bool primary_relu = true;
  std::vector<Branch> branches;
  bool dconv_relu = false;
  bool final_relu = true;

  int in_channels() const { return primary.in_channels; }
  int out_channels() const { return primary.out_channels; }
  // Throws ConfigError on a malformed branch set or inconsistent channels.
  void validate() const;
};

/// Inference-time module: 1x1 conv (+ReLU) -> 3x3 depthwise (+ReLU), both with bias.
struct RepGhostModuleDeploy {
  Conv2dParams primary;
  bool primary_relu = true;
  Conv2dParams fused_dconv;
  bool final_relu = true;

  int in_channels() const { return primary.in_channels; }
  int out_channels() const { return primary.out_channels; }
  void validate() const;
};

RepGhostModuleTrain make_repghost_module(Rng& rng, int in_channels, int out_channels, const ReparamVariant& variant,
                                         bool relu);

// bn(conv(x)) as a single conv with bias.
Conv2dParams fold_bn_into_conv(const Conv2dParams& conv, const BatchNormParams& bn);
// bn(x) as a depthwise k x k conv (center tap only).
Conv2dParams bn_to_depthwise_kernel(const BatchNormParams& bn, int k);
// Zero-pads kernels symmetrically to k x k and grows padding to k / 2.
Conv2dParams pad_kernel_to(const Conv2dParams& conv, int k);

RepGhostModuleDeploy fuse_module(const RepGhostModuleTrain& m);
// Wraps a deploy module back into a single-branch training module whose
// batch norms are exact identities, so fuse_module(as_train_form(d)) == d.
RepGhostModuleTrain as_train_form(const RepGhostModuleDeploy& d);

Tensor forward_train(const RepGhostModuleTrain& m, const Tensor& x);
Tensor forward_deploy(const RepGhostModuleDeploy& m, const Tensor& x);

struct EquivalenceReport {
  int trials = 0;
  double max_diff = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

using ForwardFn = std::function<Tensor(const Tensor&)>;

// Feeds `trials` seeded random inputs of shape `input` through both callables
// and records the largest logical difference.
EquivalenceReport verify_equivalence(const ForwardFn& reference, const ForwardFn& candidate, Shape input, int trials,
                                     double tolerance, std::uint64_t seed = 0);
EquivalenceReport verify_equivalence(const RepGhostModuleTrain& train, const RepGhostModuleDeploy& deploy,
                                     Shape input, int trials, double tolerance, std::uint64_t seed = 0);

}  // namespace repghost
