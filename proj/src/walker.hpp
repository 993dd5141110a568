// Copyright (C) 2026 repghost-cpp authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Single traversal of a network shared by the numeric forward pass and the
// shape-only trace, so operator counts, FLOPs and concat sites always describe
// exactly what network_forward executes.

#include <chrono>
#include <string>
#include <utility>
#include <variant>

#include "repghost/network.hpp"

namespace repghost::detail {

inline std::int64_t conv_macs(const Conv2dParams& p, const Shape& out) {
  return static_cast<std::int64_t>(out.count()) * p.in_per_group() * p.kernel_h * p.kernel_w;
}

template <class Backend>
class Walker {
 public:
  using Value = typename Backend::Value;

  Walker(Backend& backend, OpObserver* observer) : backend_(backend), observer_(observer) {}

  Value network(const Network& net, Value x) {
    x = unit(net.stem, std::move(x), "stem");
    for (std::size_t i = 0; i < net.blocks.size(); ++i) {
      x = bottleneck(net.blocks[i], std::move(x), "blocks." + std::to_string(i));
    }
    x = unit(net.tail, std::move(x), "tail");
    x = run(OpKind::GlobalAvgPool, "pool", {backend_.shape(x)}, 0, [&] { return backend_.pool(x); });
    x = conv(net.head, std::move(x), "head");
    x = relu(std::move(x), "head");
    return conv(net.classifier, std::move(x), "classifier");
  }

  Value bottleneck(const Bottleneck& b, const Value& x, const std::string& scope) {
    Value y = module(b.module1, x, scope + ".module1");
    if (b.mid_dw) y = unit(*b.mid_dw, std::move(y), scope + ".mid_dw");
    if (b.se) {
      const Shape s = backend_.shape(y);
      const std::int64_t macs =
          static_cast<std::int64_t>(s.n) * 2 * b.se->channels() * b.se->reduced_channels();
      y = run(OpKind::SE, scope + ".se", {s}, macs, [&] { return backend_.se(y, *b.se); });
    }
    y = module(b.module2, std::move(y), scope + ".module2");
    if (!b.shortcut_enabled) return y;
    if (!b.downsample) return add(y, x, scope + ".shortcut");
    Value sc = unit(b.downsample->depthwise, x, scope + ".shortcut.depthwise");
    sc = unit(b.downsample->pointwise, std::move(sc), scope + ".shortcut.pointwise");
    return add(y, sc, scope + ".shortcut");
  }

  Value module(const FeatureModule& m, const Value& x, const std::string& scope) {
    return std::visit([&](const auto& mod) { return module_impl(mod, x, scope); }, m);
  }

 private:
  Value module_impl(const GhostModule& m, const Value& x, const std::string& scope) {
    Value first = unit(m.primary, x, scope + ".primary");
    Value second = unit(m.cheap, first, scope + ".cheap");
    if (m.reuse == ReuseOp::Add) return add(first, second, scope);
    const Shape a = backend_.shape(first);
    const Shape b = backend_.shape(second);
    return run(OpKind::Concat, scope, {a, b}, 0, [&] { return backend_.concat(first, second); });
  }

  Value module_impl(const RepGhostModuleTrain& m, const Value& x, const std::string& scope) {
    Value y = conv(m.primary, x, scope + ".primary");
    y = bn(y, m.primary_bn, scope + ".primary");
    if (m.primary_relu) y = relu(std::move(y), scope + ".primary");
    std::optional<Value> sum;
    for (const Branch& br : m.branches) {
      const std::string bs = scope + ".branch_" + to_string(br.kind);
      Value out = y;
      if (br.conv) out = conv(*br.conv, out, bs);
      if (br.bn) out = bn(out, *br.bn, bs);
      if (br.kind == BranchKind::Dconv3x3Bn && m.dconv_relu) out = relu(std::move(out), bs);
      sum = sum ? add(*sum, out, scope) : std::move(out);
    }
    if (m.final_relu) sum = relu(std::move(*sum), scope);
    return std::move(*sum);
  }

  Value module_impl(const RepGhostModuleDeploy& m, const Value& x, const std::string& scope) {
    Value y = conv(m.primary, x, scope + ".primary");
    if (m.primary_relu) y = relu(std::move(y), scope + ".primary");
    y = conv(m.fused_dconv, std::move(y), scope + ".fused_dconv");
    if (m.final_relu) y = relu(std::move(y), scope);
    return y;
  }

  Value unit(const ConvUnit& u, Value x, const std::string& scope) {
    x = conv(u.conv, std::move(x), scope);
    if (u.bn) x = bn(x, *u.bn, scope);
    if (u.relu) x = relu(std::move(x), scope);
    return x;
  }

  Value conv(const Conv2dParams& p, const Value& x, const std::string& scope) {
    const Shape in = backend_.shape(x);
    const Shape out = p.output_shape(in);
    const OpKind kind = p.is_depthwise() && p.groups > 1 ? OpKind::DepthwiseConv : OpKind::Conv;
    return run(kind, scope, {in}, conv_macs(p, out), [&] { return backend_.conv(x, p); });
  }

  Value bn(const Value& x, const BatchNormParams& p, const std::string& scope) {
    return run(OpKind::BatchNorm, scope, {backend_.shape(x)}, 0, [&] { return backend_.bn(x, p); });
  }

  Value relu(Value x, const std::string& scope) {
    const Shape s = backend_.shape(x);
    return run(OpKind::ReLU, scope, {s}, 0, [&] { return backend_.relu(std::move(x)); });
  }

  Value add(const Value& a, const Value& b, const std::string& scope) {
    return run(OpKind::Add, scope, {backend_.shape(a), backend_.shape(b)}, 0, [&] { return backend_.add(a, b); });
  }

  template <class Fn>
  Value run(OpKind kind, const std::string& scope, std::vector<Shape> inputs, std::int64_t macs, Fn&& fn) {
    if (observer_ == nullptr) return fn();
    double elapsed_ms = 0.0;
    Value out = [&] {
      if constexpr (Backend::kTimed) {
        const auto t0 = std::chrono::steady_clock::now();
        Value v = fn();
        elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        return v;
      } else {
        return fn();
      }
    }();
    OpRecord rec;
    rec.kind = kind;
    rec.scope = scope;
    rec.inputs = std::move(inputs);
    rec.output = backend_.shape(out);
    rec.macs = macs;
    observer_->on_op(rec, elapsed_ms);
    return out;
  }

  Backend& backend_;
  OpObserver* observer_;
};

}  // namespace repghost::detail
