// Copyright (C) 2026 repghost-cpp authors
// SPDX-License-Identifier: Apache-2.0

#include "repghost/network.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>

#include "repghost/error.hpp"
#include "repghost/init.hpp"
#include "walker.hpp"

namespace repghost {

std::string to_string(Arch arch) {
  return arch == Arch::RepGhost ? "repghost" : "ghost";
}

Arch parse_arch(const std::string& text) {
  if (text == "repghost") return Arch::RepGhost;
  if (text == "ghost") return Arch::Ghost;
  throw ConfigError("unknown architecture '" + text + "' (expected repghost or ghost)");
}

std::string to_string(Form form) {
  return form == Form::Train ? "train" : "deploy";
}

std::string to_string(OpKind kind) {
  switch (kind) {
    case OpKind::Conv: return "conv";
    case OpKind::DepthwiseConv: return "dwconv";
    case OpKind::BatchNorm: return "bn";
    case OpKind::ReLU: return "relu";
    case OpKind::Add: return "add";
    case OpKind::Concat: return "concat";
    case OpKind::SE: return "se";
    case OpKind::GlobalAvgPool: return "pool";
  }
  return "?";
}

std::vector<OpKind> all_op_kinds() {
  return {OpKind::Conv, OpKind::DepthwiseConv, OpKind::BatchNorm, OpKind::ReLU,
          OpKind::Add,  OpKind::Concat,        OpKind::SE,        OpKind::GlobalAvgPool};
}

int make_divisible(double value, int divisor, int min_value) {
  if (divisor < 1) throw ConfigError("make_divisible: divisor must be >= 1");
  if (min_value <= 0) min_value = divisor;
  int rounded = std::max(min_value, static_cast<int>(value + divisor / 2.0) / divisor * divisor);
  if (rounded < 0.9 * value) rounded += divisor;
  return rounded;
}

// Table rows (#mid, #out, SE, stride, dw kernel). The depthwise kernel column
// is not part of the printed table; 5x5 is used where GhostNet uses it.
std::vector<BottleneckSpec> repghostnet_rows() {
  return {
      {8, 16, false, 1, 3},     {24, 24, false, 2, 3},    {36, 24, false, 1, 3},    {36, 40, true, 2, 5},
      {60, 40, true, 1, 5},     {120, 80, false, 2, 3},   {100, 80, false, 1, 3},   {120, 80, false, 1, 3},
      {120, 80, false, 1, 3},   {240, 112, true, 1, 3},   {336, 112, true, 1, 3},   {336, 160, true, 2, 5},
      {480, 160, false, 1, 5},  {480, 160, true, 1, 5},   {480, 160, false, 1, 5},  {480, 160, true, 1, 5},
  };
}

std::vector<BottleneckSpec> ghostnet_rows() {
  return {
      {16, 16, false, 1, 3},    {48, 24, false, 2, 3},    {72, 24, false, 1, 3},    {72, 40, true, 2, 5},
      {120, 40, true, 1, 5},    {240, 80, false, 2, 3},   {200, 80, false, 1, 3},   {184, 80, false, 1, 3},
      {184, 80, false, 1, 3},   {480, 112, true, 1, 3},   {672, 112, true, 1, 3},   {672, 160, true, 2, 5},
      {960, 160, false, 1, 5},  {960, 160, true, 1, 5},   {960, 160, false, 1, 5},  {960, 160, true, 1, 5},
  };
}

NetworkSpec NetworkSpec::repghostnet(double width, bool use_shortcut) {
  NetworkSpec s;
  s.arch = Arch::RepGhost;
  s.rows = repghostnet_rows();
  s.width = width;
  s.use_shortcut = use_shortcut;
  return s;
}

NetworkSpec NetworkSpec::ghostnet(double width, ReuseOp reuse) {
  NetworkSpec s;
  s.arch = Arch::Ghost;
  s.rows = ghostnet_rows();
  s.width = width;
  s.reuse = reuse;
  return s;
}

void NetworkSpec::validate() const {
  if (!(width > 0.0) || !std::isfinite(width)) {
    throw ConfigError("width multiplier must be > 0, got " + std::to_string(width));
  }
  if (rows.empty()) throw ConfigError("network spec has no bottleneck rows");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const BottleneckSpec& r = rows[i];
    if (r.mid < 1 || r.out < 1) throw ConfigError("row " + std::to_string(i) + ": channels must be positive");
    if (r.stride != 1 && r.stride != 2) throw ConfigError("row " + std::to_string(i) + ": stride must be 1 or 2");
    if (r.dw_kernel < 1 || r.dw_kernel % 2 == 0) {
      throw ConfigError("row " + std::to_string(i) + ": depthwise kernel must be odd");
    }
  }
  if (stem_channels < 1 || tail_channels < 1 || head_channels < 1 || num_classes < 1) {
    throw ConfigError("stem/tail/head/classifier widths must be positive");
  }
}

namespace {

ConvUnit make_unit(Rng& rng, int out, int in, int kernel, int stride, int groups, bool relu) {
  ConvUnit u;
  u.conv = random_conv(rng, out, in, kernel, stride, kernel / 2, groups);
  u.bn = random_bn(rng, out);
  u.relu = relu;
  return u;
}

GhostModule make_ghost_module(Rng& rng, int in, int out, bool relu, ReuseOp reuse) {
  GhostModule m;
  m.reuse = reuse;
  if (reuse == ReuseOp::Concat) {
    if (out % 2 != 0) throw ConfigError("ghost module: output width must be even, got " + std::to_string(out));
    const int half = out / 2;
    m.primary = make_unit(rng, half, in, 1, 1, 1, relu);
    m.cheap = make_unit(rng, half, half, 3, 1, half, relu);
  } else {
    m.primary = make_unit(rng, out, in, 1, 1, 1, relu);
    m.cheap = make_unit(rng, out, out, 3, 1, out, relu);
  }
  return m;
}

FeatureModule make_feature_module(Rng& rng, const NetworkSpec& spec, int in, int out, bool relu) {
  if (spec.arch == Arch::Ghost) return make_ghost_module(rng, in, out, relu, spec.reuse);
  return make_repghost_module(rng, in, out, spec.variant, relu);
}

void fold_unit(ConvUnit& u) {
  if (u.bn) {
    u.conv = fold_bn_into_conv(u.conv, *u.bn);
    u.bn.reset();
  }
}

FeatureModule convert_module(const FeatureModule& m) {
  if (const auto* g = std::get_if<GhostModule>(&m)) {
    GhostModule out = *g;
    fold_unit(out.primary);
    fold_unit(out.cheap);
    return out;
  }
  if (const auto* t = std::get_if<RepGhostModuleTrain>(&m)) return fuse_module(*t);
  return m;
}

template <class NetT, class F>
void visit_unit(NetT& u, const std::string& prefix, F&& f) {
  f(prefix + ".conv.weight", u.conv.weight,
    std::vector<int>{u.conv.out_channels, u.conv.in_per_group(), u.conv.kernel_h, u.conv.kernel_w});
  if (u.conv.has_bias()) f(prefix + ".conv.bias", u.conv.bias, std::vector<int>{u.conv.out_channels});
  if (u.bn) {
    const std::vector<int> dims{u.bn->channels()};
    f(prefix + ".bn.gamma", u.bn->gamma, dims);
    f(prefix + ".bn.beta", u.bn->beta, dims);
    f(prefix + ".bn.running_mean", u.bn->running_mean, dims);
    f(prefix + ".bn.running_var", u.bn->running_var, dims);
  }
}

template <class ConvT, class F>
void visit_conv(ConvT& c, const std::string& prefix, F&& f) {
  f(prefix + ".weight", c.weight, std::vector<int>{c.out_channels, c.in_per_group(), c.kernel_h, c.kernel_w});
  if (c.has_bias()) f(prefix + ".bias", c.bias, std::vector<int>{c.out_channels});
}

template <class BnT, class F>
void visit_bn(BnT& bn, const std::string& prefix, F&& f) {
  const std::vector<int> dims{bn.channels()};
  f(prefix + ".gamma", bn.gamma, dims);
  f(prefix + ".beta", bn.beta, dims);
  f(prefix + ".running_mean", bn.running_mean, dims);
  f(prefix + ".running_var", bn.running_var, dims);
}

template <class ModT, class F>
void visit_module(ModT& m, const std::string& prefix, F&& f) {
  std::visit(
      [&](auto& mod) {
        using T = std::decay_t<decltype(mod)>;
        if constexpr (std::is_same_v<T, GhostModule>) {
          visit_unit(mod.primary, prefix + ".primary", f);
          visit_unit(mod.cheap, prefix + ".cheap", f);
        } else if constexpr (std::is_same_v<T, RepGhostModuleTrain>) {
          visit_conv(mod.primary, prefix + ".primary.conv", f);
          visit_bn(mod.primary_bn, prefix + ".primary.bn", f);
          for (auto& b : mod.branches) {
            const std::string bp = prefix + ".branch_" + to_string(b.kind);
            if (b.conv) visit_conv(*b.conv, bp + ".conv", f);
            if (b.bn) visit_bn(*b.bn, bp + ".bn", f);
          }
        } else {
          visit_conv(mod.primary, prefix + ".primary.conv", f);
          visit_conv(mod.fused_dconv, prefix + ".fused_dconv", f);
        }
      },
      m);
}

}  // namespace

// Visits every parameter vector in a stable order. Works for const and
// mutable networks.
template <class NetT, class F>
void visit_params(NetT& net, F&& f) {
  visit_unit(net.stem, "stem", f);
  for (std::size_t i = 0; i < net.blocks.size(); ++i) {
    auto& b = net.blocks[i];
    const std::string p = "blocks." + std::to_string(i);
    visit_module(b.module1, p + ".module1", f);
    if (b.mid_dw) visit_unit(*b.mid_dw, p + ".mid_dw", f);
    if (b.se) {
      visit_conv(b.se->reduce, p + ".se.reduce", f);
      visit_conv(b.se->expand, p + ".se.expand", f);
    }
    visit_module(b.module2, p + ".module2", f);
    if (b.downsample) {
      visit_unit(b.downsample->depthwise, p + ".shortcut.depthwise", f);
      visit_unit(b.downsample->pointwise, p + ".shortcut.pointwise", f);
    }
  }
  visit_unit(net.tail, "tail", f);
  visit_conv(net.head, "head", f);
  visit_conv(net.classifier, "classifier", f);
}

Network build_network(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  Network net;
  net.spec = spec;
  net.form = Form::Train;

  int channels = make_divisible(spec.stem_channels * spec.width, 4);
  net.stem = make_unit(rng, channels, 3, 3, 2, 1, true);

  for (const BottleneckSpec& row : spec.rows) {
    const int out = make_divisible(row.out * spec.width, 4);
    const int mid = make_divisible(row.mid * spec.width, 4);
    Bottleneck b;
    b.in_channels = channels;
    b.out_channels = out;
    b.stride = row.stride;
    b.module1 = make_feature_module(rng, spec, channels, mid, true);
    if (row.stride > 1) {
      b.mid_dw = make_unit(rng, mid, mid, row.dw_kernel, row.stride, mid, false);
    }
    if (row.use_se) b.se = random_se(rng, mid, make_divisible(mid * 0.25, 4));
    b.module2 = make_feature_module(rng, spec, mid, out, false);
    if (channels != out || row.stride != 1) {
      Downsample ds;
      ds.depthwise = make_unit(rng, channels, channels, row.dw_kernel, row.stride, channels, false);
      ds.pointwise = make_unit(rng, out, channels, 1, 1, 1, false);
      b.downsample = std::move(ds);
    }
    // only identity shortcuts are dropped; downsample blocks keep the
    // parameter and FLOP budget unchanged
    b.shortcut_enabled = spec.use_shortcut || b.downsample.has_value();
    net.blocks.push_back(std::move(b));
    channels = out;
  }

  const int tail = make_divisible(spec.tail_channels * spec.width, 4);
  net.tail = make_unit(rng, tail, channels, 1, 1, 1, true);
  net.head = random_conv(rng, spec.head_channels, tail, 1, 1, 0, 1, true);
  net.classifier = random_conv(rng, spec.num_classes, spec.head_channels, 1, 1, 0, 1, true);
  calibrate_batchnorm(net, tensor_from_seed(Shape{4, 3, 112, 112}, Layout::NCHW, seed ^ 0x9e3779b97f4a7c15ULL));
  return net;
}

Network build_repghostnet(double width, bool use_shortcut, std::uint64_t seed, const ReparamVariant& variant) {
  NetworkSpec spec = NetworkSpec::repghostnet(width, use_shortcut);
  spec.variant = variant;
  return build_network(spec, seed);
}

Network build_ghostnet(double width, std::uint64_t seed, ReuseOp reuse) {
  return build_network(NetworkSpec::ghostnet(width, reuse), seed);
}

Network convert_network(const Network& net) {
  if (net.form == Form::Deploy) return net;
  Network out = net;
  out.form = Form::Deploy;
  fold_unit(out.stem);
  for (Bottleneck& b : out.blocks) {
    b.module1 = convert_module(b.module1);
    if (b.mid_dw) fold_unit(*b.mid_dw);
    b.module2 = convert_module(b.module2);
    if (b.downsample) {
      fold_unit(b.downsample->depthwise);
      fold_unit(b.downsample->pointwise);
    }
  }
  fold_unit(out.tail);
  return out;
}

std::vector<ParamRef> collect_params(Network& net) {
  std::vector<ParamRef> refs;
  visit_params(net, [&](const std::string& name, std::vector<float>& data, std::vector<int> dims) {
    refs.push_back(ParamRef{name, std::move(dims), &data});
  });
  return refs;
}

bool is_bn_param(const std::string& name) {
  for (const char* suffix : {".gamma", ".beta", ".running_mean", ".running_var"}) {
    const std::string s(suffix);
    if (name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0) return true;
  }
  return false;
}

std::int64_t count_params(const Network& net, bool fused) {
  if (fused && net.form == Form::Train) return count_params(convert_network(net), true);
  std::int64_t total = 0;
  visit_params(net, [&](const std::string& name, const std::vector<float>& data, const std::vector<int>&) {
    // running statistics are buffers, not learnable parameters
    if (name.ends_with(".running_mean") || name.ends_with(".running_var")) return;
    total += static_cast<std::int64_t>(data.size());
  });
  return total;
}

namespace {

class TensorBackend {
 public:
  using Value = Tensor;
  static Shape shape(const Tensor& t) { return t.shape(); }
  static Tensor conv(const Tensor& x, const Conv2dParams& p) { return conv2d(x, p); }
  static Tensor bn(const Tensor& x, const BatchNormParams& p) { return batch_norm_infer(x, p); }
  static Tensor relu(Tensor x) {
    relu_inplace(x);
    return x;
  }
  static Tensor add(const Tensor& a, const Tensor& b) { return add_elementwise(a, b); }
  static Tensor concat(const Tensor& a, const Tensor& b) { return concat_channels(a, b); }
  static Tensor se(const Tensor& x, const SEParams& p) { return se_forward(x, p); }
  static Tensor pool(const Tensor& x) { return global_avg_pool(x); }
  static constexpr bool kTimed = true;
};

// Forward backend whose BN step first overwrites the layer's running
// statistics with those of its actual input.
class CalibratingBackend : public TensorBackend {
 public:
  static Tensor bn(const Tensor& x, const BatchNormParams& p) {
    // the walker only hands out const references; the network being walked
    // is a non-const object owned by calibrate_batchnorm
    auto& mut = const_cast<BatchNormParams&>(p);
    const Shape s = x.shape();
    const double count = static_cast<double>(s.n) * s.h * s.w;
    for (int c = 0; c < s.c; ++c) {
      double sum = 0.0;
      double sq = 0.0;
      for (int n = 0; n < s.n; ++n) {
        for (int y = 0; y < s.h; ++y) {
          for (int xx = 0; xx < s.w; ++xx) {
            const double v = x.at(n, c, y, xx);
            sum += v;
            sq += v * v;
          }
        }
      }
      const double mean = sum / count;
      mut.running_mean[c] = static_cast<float>(mean);
      mut.running_var[c] = static_cast<float>(std::max(sq / count - mean * mean, 1e-2));
    }
    return batch_norm_infer(x, p);
  }
};

Tensor forward_single(const Network& net, const Tensor& x, OpObserver* observer) {
  TensorBackend backend;
  detail::Walker<TensorBackend> walker(backend, observer);
  return walker.network(net, x);
}

}  // namespace

void calibrate_batchnorm(Network& net, const Tensor& x) {
  if (net.form != Form::Train) throw ConfigError("calibrate_batchnorm: network must be in train form");
  if (x.shape().c != net.input_channels()) throw ShapeError("calibrate_batchnorm: input channel mismatch");
  CalibratingBackend backend;
  detail::Walker<CalibratingBackend> walker(backend, nullptr);
  walker.network(net, x);
}

Tensor network_forward(const Network& net, const Tensor& x, OpObserver* observer, int threads) {
  const Shape& s = x.shape();
  if (s.c != net.input_channels()) {
    throw ShapeError("network input must have " + std::to_string(net.input_channels()) + " channels, got " +
                     std::to_string(s.c));
  }
  if (s.h < 32 || s.w < 32) throw ShapeError("network input must be at least 32x32, got " + to_string(s));
  if (threads <= 1 || s.n == 1) return forward_single(net, x, observer);
  if (observer != nullptr) throw ConfigError("network_forward: an observer requires single-threaded execution");

  const int workers = std::min(threads, s.n);
  std::vector<std::future<Tensor>> parts;
  for (int w = 0; w < workers; ++w) {
    const int begin = s.n * w / workers;
    const int end = s.n * (w + 1) / workers;
    parts.push_back(std::async(std::launch::async,
                               [&net, chunk = slice_batch(x, begin, end)] { return forward_single(net, chunk, nullptr); }));
  }
  std::vector<Tensor> outs;
  for (auto& f : parts) outs.push_back(f.get());
  return stack_batch(outs);
}

}  // namespace repghost
