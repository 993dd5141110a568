// Copyright (C) 2026 repghost-cpp authors
// SPDX-License-Identifier: Apache-2.0

#include <string>

#include "repghost/error.hpp"
#include "repghost/network.hpp"
#include "walker.hpp"

namespace repghost {

namespace {

class ShapeBackend {
 public:
  using Value = Shape;
  static Shape shape(const Shape& s) { return s; }
  static Shape conv(const Shape& x, const Conv2dParams& p) { return p.output_shape(x); }
  static Shape bn(const Shape& x, const BatchNormParams& p) {
    if (x.c != p.channels()) throw ShapeError("batch norm: channel mismatch in trace");
    return x;
  }
  static Shape relu(Shape x) { return x; }
  static Shape add(const Shape& a, const Shape& b) {
    if (!(a == b)) throw ShapeError("add: shape mismatch " + to_string(a) + " vs " + to_string(b));
    return a;
  }
  static Shape concat(const Shape& a, const Shape& b) {
    if (a.n != b.n || a.h != b.h || a.w != b.w) throw ShapeError("concat: n/h/w mismatch in trace");
    return Shape{a.n, a.c + b.c, a.h, a.w};
  }
  static Shape se(const Shape& x, const SEParams& p) {
    if (x.c != p.channels()) throw ShapeError("se: channel mismatch in trace");
    return x;
  }
  static Shape pool(const Shape& x) { return Shape{x.n, x.c, 1, 1}; }
  static constexpr bool kTimed = false;
};

class Recorder : public OpObserver {
 public:
  void on_op(const OpRecord& record, double) override { records.push_back(record); }
  std::vector<OpRecord> records;
};

bool in_module(const std::string& scope) {
  return scope.find(".module1") != std::string::npos || scope.find(".module2") != std::string::npos;
}

int module_paths(const FeatureModule& m) {
  if (const auto* t = std::get_if<RepGhostModuleTrain>(&m)) return static_cast<int>(t->branches.size());
  // concat keeps the primary feature as a path next to the cheap one
  if (std::holds_alternative<GhostModule>(m)) return 2;
  return 1;
}

}  // namespace

std::vector<OpRecord> trace_network(const Network& net, Shape input) {
  validate_shape(input);
  if (input.c != net.input_channels()) {
    throw ShapeError("trace: input must have " + std::to_string(net.input_channels()) + " channels");
  }
  ShapeBackend backend;
  Recorder recorder;
  detail::Walker<ShapeBackend> walker(backend, &recorder);
  walker.network(net, input);
  return std::move(recorder.records);
}

std::int64_t count_flops(const Network& net, std::pair<int, int> input_hw, bool fused) {
  if (fused && net.form == Form::Train) return count_flops(convert_network(net), input_hw, true);
  std::int64_t total = 0;
  for (const OpRecord& r : trace_network(net, Shape{1, net.input_channels(), input_hw.first, input_hw.second})) {
    total += r.macs;
  }
  return total;
}

std::vector<ConcatSite> enumerate_concat_sites(const Network& net, Shape input) {
  std::vector<ConcatSite> sites;
  for (const OpRecord& r : trace_network(net, input)) {
    if (r.kind != OpKind::Concat) continue;
    ConcatSite site;
    site.scope = r.scope;
    // scope is "blocks.<i>.moduleN"
    const auto dot = r.scope.find('.');
    site.block = std::stoi(r.scope.substr(dot + 1));
    site.first = r.inputs.at(0);
    site.second = r.inputs.at(1);
    sites.push_back(site);
  }
  return sites;
}

int bottleneck_paths(const Bottleneck& b) {
  const int main_paths = module_paths(b.module1) * module_paths(b.module2);
  return main_paths + (b.shortcut_enabled ? 1 : 0);
}

OpCensus census(const Network& net, Shape input) {
  OpCensus c;
  for (const OpRecord& r : trace_network(net, input)) {
    ++c.counts[r.kind];
    if (r.kind == OpKind::Add) {
      if (in_module(r.scope)) {
        ++c.module_adds;
      } else {
        ++c.shortcut_adds;
      }
    }
    if (r.kind == OpKind::Concat && in_module(r.scope)) ++c.module_concats;
  }
  for (const Bottleneck& b : net.blocks) c.bottleneck_paths.push_back(bottleneck_paths(b));
  return c;
}

}  // namespace repghost
