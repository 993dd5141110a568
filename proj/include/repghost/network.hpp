// Copyright (C) 2026 repghost-cpp authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "repghost/ops.hpp"
#include "repghost/reparam.hpp"
#include "repghost/tensor.hpp"

namespace repghost {

enum class Arch { RepGhost, Ghost };
enum class Form { Train, Deploy };
// How a Ghost module joins its primary and cheap features.
enum class ReuseOp { Concat, Add };

std::string to_string(Arch arch);
Arch parse_arch(const std::string& text);
std::string to_string(Form form);

// Round to the nearest multiple of divisor, never below min_value (defaults to
// divisor), and never more than 10% below the requested value.
int make_divisible(double value, int divisor, int min_value = 0);

/// One bottleneck row of the architecture table, before width scaling.
struct BottleneckSpec {
  // #mid column. For RepGhost it is the width of both modules' reused
  // feature; for Ghost it is the full middle width C_mid.
  int mid = 0;
  int out = 0;
  bool use_se = false;
  int stride = 1;
  // Kernel of the stride-2 depthwise and of the downsample shortcut.
  int dw_kernel = 3;

  bool operator==(const BottleneckSpec&) const = default;
};

struct NetworkSpec {
  Arch arch = Arch::RepGhost;
  std::vector<BottleneckSpec> rows;
  double width = 1.0;
  bool use_shortcut = true;
  int stem_channels = 16;
  int tail_channels = 960;  // scaled by width
  int head_channels = 1280;  // fixed
  int num_classes = 1000;
  ReparamVariant variant = default_variant();
  ReuseOp reuse = ReuseOp::Concat;

  static NetworkSpec repghostnet(double width, bool use_shortcut = true);
  static NetworkSpec ghostnet(double width, ReuseOp reuse = ReuseOp::Concat);

  void validate() const;
};

std::vector<BottleneckSpec> repghostnet_rows();
std::vector<BottleneckSpec> ghostnet_rows();

/// conv -> optional BN -> optional ReLU.
struct ConvUnit {
  Conv2dParams conv;
  std::optional<BatchNormParams> bn;
  bool relu = false;
};

struct GhostModule {
  ConvUnit primary;
  ConvUnit cheap;
  ReuseOp reuse = ReuseOp::Concat;

  int in_channels() const { return primary.conv.in_channels; }
  int out_channels() const {
    return reuse == ReuseOp::Concat ? primary.conv.out_channels + cheap.conv.out_channels : cheap.conv.out_channels;
  }
};

using FeatureModule = std::variant<GhostModule, RepGhostModuleTrain, RepGhostModuleDeploy>;

struct Downsample {
  ConvUnit depthwise;
  ConvUnit pointwise;
};

struct Bottleneck {
  int in_channels = 0;
  int out_channels = 0;
  int stride = 1;
  FeatureModule module1;
  std::optional<ConvUnit> mid_dw;
  std::optional<SEParams> se;
  FeatureModule module2;
  // Absent means an identity shortcut.
  std::optional<Downsample> downsample;
  bool shortcut_enabled = true;
};

struct Network {
  NetworkSpec spec;
  Form form = Form::Train;
  ConvUnit stem;
  std::vector<Bottleneck> blocks;
  ConvUnit tail;
  Conv2dParams head;
  Conv2dParams classifier;

  int input_channels() const { return stem.conv.in_channels; }
};

// Seeded random parameters. BN running statistics are then calibrated on a
// seeded input (see calibrate_batchnorm) so activations stay near unit scale.
Network build_network(const NetworkSpec& spec, std::uint64_t seed);
Network build_repghostnet(double width, bool use_shortcut, std::uint64_t seed,
                          const ReparamVariant& variant = default_variant());
Network build_ghostnet(double width, std::uint64_t seed, ReuseOp reuse = ReuseOp::Concat);

// Runs a train-form network on `x` and sets every BN's running mean and
// variance to the per-channel statistics of its input, layer by layer, so
// each BN sees already-calibrated upstream layers. Variances are floored at
// 1e-2 to keep dead channels from being scaled up.
void calibrate_batchnorm(Network& net, const Tensor& x);

// Folds every BN and fuses every RepGhost module. Converting a deploy-form
// network returns it unchanged.
Network convert_network(const Network& net);

enum class OpKind { Conv, DepthwiseConv, BatchNorm, ReLU, Add, Concat, SE, GlobalAvgPool };

std::string to_string(OpKind kind);
std::vector<OpKind> all_op_kinds();

/// One executed (or traced) operator.
struct OpRecord {
  OpKind kind = OpKind::Conv;
  std::string scope;
  std::vector<Shape> inputs;
  Shape output;
  std::int64_t macs = 0;
};

class OpObserver {
 public:
  virtual ~OpObserver() = default;
  // elapsed_ms is the wall time of the operator (0 when tracing shapes only).
  virtual void on_op(const OpRecord& record, double elapsed_ms) = 0;
};

// Runs the network. `threads` > 1 splits the batch across worker threads and
// is incompatible with an observer.
Tensor network_forward(const Network& net, const Tensor& x, OpObserver* observer = nullptr, int threads = 1);

// Shape-only walk emitting the same operator sequence network_forward runs.
std::vector<OpRecord> trace_network(const Network& net, Shape input);

// Learnable scalars: conv weights and biases, BN gamma/beta, SE and classifier.
std::int64_t count_params(const Network& net, bool fused);
// Multiply-accumulates of conv / linear layers for a batch-1 input.
std::int64_t count_flops(const Network& net, std::pair<int, int> input_hw, bool fused);

struct ConcatSite {
  int block = 0;
  std::string scope;
  Shape first;
  Shape second;
};

std::vector<ConcatSite> enumerate_concat_sites(const Network& net, Shape input = Shape{1, 3, 224, 224});

struct OpCensus {
  std::map<OpKind, int> counts;
  int module_adds = 0;    // adds inside feature modules
  int module_concats = 0;
  int shortcut_adds = 0;
  // Input-to-output paths through each bottleneck: a single chain plus a
  // shortcut gives 2.
  std::vector<int> bottleneck_paths;

  int count(OpKind kind) const {
    const auto it = counts.find(kind);
    return it == counts.end() ? 0 : it->second;
  }
};

OpCensus census(const Network& net, Shape input = Shape{1, 3, 224, 224});
int bottleneck_paths(const Bottleneck& b);

/// Named view of one parameter tensor inside a network.
struct ParamRef {
  std::string name;
  std::vector<int> dims;
  std::vector<float>* data = nullptr;
};

std::vector<ParamRef> collect_params(Network& net);
bool is_bn_param(const std::string& name);

// Architecture table text: one row per bottleneck,
// "<h>^2x<c>  <#mid>  <#out>  <se 0/1>  <stride>  [dw_kernel]".
std::vector<BottleneckSpec> parse_arch_table(const std::string& text, int stem_channels = 16, int input_hw = 224);
std::string format_arch_table(const std::vector<BottleneckSpec>& rows, int stem_channels = 16, int input_hw = 224);

}  // namespace repghost
