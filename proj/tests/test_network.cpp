// Copyright (C) 2026 repghost-cpp authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <set>
#include <variant>

#include "repghost/error.hpp"
#include "repghost/network.hpp"

using namespace repghost;

namespace {

int module_out(const FeatureModule& m) {
  return std::visit([](const auto& mod) { return mod.out_channels(); }, m);
}

struct SequenceRecorder : OpObserver {
  std::vector<OpRecord> records;
  void on_op(const OpRecord& r, double elapsed_ms) override {
    CHECK(elapsed_ms >= 0.0);
    records.push_back(r);
  }
};

bool within(double value, double target, double rel) {
  return std::fabs(value - target) <= rel * target;
}

}  // namespace

TEST_CASE("make_divisible") {
  CHECK(make_divisible(16, 4) == 16);
  CHECK(make_divisible(16 * 0.5, 4) == 8);
  CHECK(make_divisible(36 * 1.3, 4) == 48);
  CHECK(make_divisible(1, 4) == 4);
  // 0.9 guard: 10 rounds to 8 with divisor 8, which is below 9, so bump to 16
  CHECK(make_divisible(10, 8) == 16);
}

TEST_CASE("RepGhostNet 1.0x channel sequences") {
  const Network net = build_repghostnet(1.0, true, 0);
  REQUIRE(net.blocks.size() == 16);
  std::vector<int> outs;
  std::vector<int> mids;
  for (const Bottleneck& b : net.blocks) {
    outs.push_back(b.out_channels);
    mids.push_back(module_out(b.module1));
  }
  CHECK(outs == std::vector<int>{16, 24, 24, 40, 40, 80, 80, 80, 80, 112, 112, 160, 160, 160, 160, 160});
  CHECK(mids == std::vector<int>{8, 24, 36, 36, 60, 120, 100, 120, 120, 240, 336, 336, 480, 480, 480, 480});
  std::vector<int> strides;
  for (const Bottleneck& b : net.blocks) strides.push_back(b.stride);
  CHECK(strides == std::vector<int>{1, 2, 1, 2, 1, 2, 1, 1, 1, 1, 1, 2, 1, 1, 1, 1});
  CHECK(net.stem.conv.out_channels == 16);
  CHECK(net.tail.conv.out_channels == 960);
  CHECK(net.head.out_channels == 1280);
  CHECK(net.classifier.out_channels == 1000);
}

TEST_CASE("width scaling") {
  CHECK(build_repghostnet(0.5, true, 0).stem.conv.out_channels == 8);
  for (double w : {0.5, 0.58, 1.0, 1.11, 1.3, 1.5}) {
    CAPTURE(w);
    const Network net = build_repghostnet(w, true, 0);
    for (const Bottleneck& b : net.blocks) {
      CHECK(b.out_channels % 4 == 0);
      CHECK(module_out(b.module1) % 4 == 0);
    }
    // channels stay non-decreasing inside the last stage
    for (std::size_t i = 12; i < net.blocks.size(); ++i) {
      CHECK(module_out(net.blocks[i].module1) >= module_out(net.blocks[i - 1].module1));
      CHECK(net.blocks[i].out_channels >= net.blocks[i - 1].out_channels);
    }
  }
  CHECK_THROWS_AS(build_repghostnet(0.0, true, 0), ConfigError);
  CHECK_THROWS_AS(build_ghostnet(-1.0, 0), ConfigError);
}

TEST_CASE("GhostNet modules concatenate two halves") {
  const Network net = build_ghostnet(1.0, 0);
  const auto& m = std::get<GhostModule>(net.blocks[0].module1);
  CHECK(m.primary.conv.out_channels == 8);
  CHECK(m.cheap.conv.out_channels == 8);
  CHECK(m.cheap.conv.is_depthwise());
  CHECK(m.out_channels() == 16);
}

TEST_CASE("parameter and FLOP counts") {
  struct Row {
    double width;
    double params_m;
    double flops_m;
  };
  for (const Row& r : {Row{0.5, 2.3, 43}, Row{1.0, 4.1, 142}, Row{1.3, 5.5, 231}, Row{1.5, 6.6, 301}}) {
    CAPTURE(r.width);
    const Network net = build_repghostnet(r.width, true, 0);
    const auto params = static_cast<double>(count_params(net, true));
    const auto flops = static_cast<double>(count_flops(net, {224, 224}, true));
    CHECK(within(params / 1e6, r.params_m, 0.03));
    CHECK(within(flops / 1e6, r.flops_m, 0.05));
    CHECK(count_params(net, false) > count_params(net, true));
    CHECK(count_params(convert_network(net), false) == count_params(net, true));
    const Network ghost = build_ghostnet(r.width, 0);
    CHECK(count_params(net, true) < count_params(ghost, true));
  }
  const Network g1 = build_ghostnet(1.0, 0);
  CHECK(within(count_params(g1, true) / 1e6, 5.2, 0.03));
  CHECK(within(count_flops(g1, {224, 224}, true) / 1e6, 141, 0.05));
  CHECK(within(count_params(build_ghostnet(0.5, 0), true) / 1e6, 2.6, 0.03));
}

TEST_CASE("conv MACs follow the closed form") {
  const Network net = build_repghostnet(1.0, true, 0);
  const std::vector<OpRecord> ops = trace_network(net, Shape{1, 3, 224, 224});
  REQUIRE(!ops.empty());
  CHECK(ops[0].kind == OpKind::Conv);
  CHECK(ops[0].macs == 16LL * 112 * 112 * 3 * 3 * 3);
  // stem conv 3 -> 16 with bias folded in: 16*3*9 + 16
  CHECK(net.stem.conv.weight.size() + net.stem.conv.out_channels == 448);
}

TEST_CASE("shortcut flag changes neither params nor FLOPs") {
  for (double w : {0.5, 1.0}) {
    const Network with = build_repghostnet(w, true, 1);
    const Network without = build_repghostnet(w, false, 1);
    CHECK(count_params(with, true) == count_params(without, true));
    CHECK(count_flops(with, {224, 224}, true) == count_flops(without, {224, 224}, true));
    const OpCensus a = census(convert_network(with));
    const OpCensus b = census(convert_network(without));
    CHECK(a.shortcut_adds - b.shortcut_adds == 11);
  }
}

TEST_CASE("concat sites") {
  const std::vector<ConcatSite> full = enumerate_concat_sites(build_ghostnet(1.0, 0));
  const std::vector<ConcatSite> half = enumerate_concat_sites(build_ghostnet(0.5, 0));
  REQUIRE(full.size() == 32);
  REQUIRE(half.size() == 32);
  for (std::size_t i = 0; i < full.size(); ++i) {
    CHECK(full[i].first == full[i].second);
    CHECK(full[i].block == static_cast<int>(i / 2));
    CHECK(half[i].first.h == full[i].first.h);
    CHECK(half[i].first.c <= full[i].first.c);
  }
  CHECK(full[0].first == Shape{1, 8, 112, 112});
  CHECK(half[0].first == Shape{1, 4, 112, 112});
  const Network rep = build_repghostnet(1.0, true, 0);
  CHECK(enumerate_concat_sites(rep).empty());
  CHECK(enumerate_concat_sites(convert_network(rep)).empty());
  CHECK(enumerate_concat_sites(build_ghostnet(1.0, 0, ReuseOp::Add)).empty());
}

TEST_CASE("deploy-form structure") {
  const Network train = build_repghostnet(1.0, true, 0);
  const OpCensus before = census(train);
  CHECK(before.count(OpKind::BatchNorm) > 0);
  CHECK(before.module_adds > 0);

  const Network deploy = convert_network(train);
  const OpCensus after = census(deploy);
  CHECK(after.count(OpKind::BatchNorm) == 0);
  CHECK(after.module_adds == 0);
  CHECK(after.module_concats == 0);
  CHECK(after.shortcut_adds == 16);
  CHECK(after.count(OpKind::Add) == 16);
  CHECK(after.count(OpKind::Concat) == 0);
  REQUIRE(after.bottleneck_paths.size() == 16);
  for (int p : after.bottleneck_paths) CHECK(p == 2);

  const OpCensus no_sc = census(convert_network(build_repghostnet(1.0, false, 0)));
  for (std::size_t i = 0; i < no_sc.bottleneck_paths.size(); ++i) {
    const bool identity = !deploy.blocks[i].downsample.has_value();
    CHECK(no_sc.bottleneck_paths[i] == (identity ? 1 : 2));
  }
}

TEST_CASE("converting twice equals converting once") {
  const Network once = convert_network(build_repghostnet(0.5, true, 4));
  const Network twice = convert_network(once);
  Network a = once;
  Network b = twice;
  const auto pa = collect_params(a);
  const auto pb = collect_params(b);
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].name == pb[i].name);
    CHECK(*pa[i].data == *pb[i].data);
  }
}

TEST_CASE("train and deploy networks agree") {
  const Network train = build_repghostnet(0.5, true, 3);
  const Network deploy = convert_network(train);
  const Tensor x = tensor_from_seed(Shape{1, 3, 224, 224}, Layout::NCHW, 77);
  const Tensor a = network_forward(train, x);
  CHECK(a.shape() == Shape{1, 1000, 1, 1});
  CHECK(max_abs_diff(a, network_forward(deploy, x)) <= 1e-4);
  const Network ghost = build_ghostnet(0.5, 3);
  const Tensor small = tensor_from_seed(Shape{1, 3, 64, 64}, Layout::NCHW, 5);
  CHECK(max_abs_diff(network_forward(ghost, small), network_forward(convert_network(ghost), small)) <= 1e-4);
}

TEST_CASE("zero input gives finite logits") {
  const Network net = build_repghostnet(0.5, true, 0);
  const Tensor y = network_forward(net, Tensor(Shape{1, 3, 64, 64}));
  for (float v : y.data()) CHECK(std::isfinite(v));
}

TEST_CASE("batch independence and threading") {
  const Network net = convert_network(build_repghostnet(0.5, true, 2));
  const Tensor x = tensor_from_seed(Shape{2, 3, 64, 64}, Layout::NCHW, 8);
  const std::vector<Tensor> singles{network_forward(net, slice_batch(x, 0, 1)), network_forward(net, slice_batch(x, 1, 2))};
  const Tensor batched = network_forward(net, x);
  CHECK(max_abs_diff(batched, stack_batch(singles)) <= 1e-6);
  CHECK(max_abs_diff(batched, network_forward(net, x, nullptr, 2)) <= 1e-6);
}

TEST_CASE("NHWC forward matches NCHW") {
  const Network net = convert_network(build_repghostnet(0.5, true, 2));
  const Tensor x = tensor_from_seed(Shape{1, 3, 64, 64}, Layout::NCHW, 8);
  CHECK(max_abs_diff(network_forward(net, x), network_forward(net, layout_convert(x, Layout::NHWC))) <= 1e-5);
}

TEST_CASE("forward input validation") {
  const Network net = build_repghostnet(0.5, true, 0);
  CHECK_THROWS_AS(network_forward(net, Tensor(Shape{1, 1, 64, 64})), ShapeError);
  CHECK_THROWS_AS(network_forward(net, Tensor(Shape{1, 3, 16, 16})), ShapeError);
}

TEST_CASE("forward and trace emit the same operator sequence") {
  for (const Network& net : {build_ghostnet(0.5, 1), build_repghostnet(0.5, true, 1)}) {
    for (const Network& n : {net, convert_network(net)}) {
      SequenceRecorder rec;
      network_forward(n, tensor_from_seed(Shape{1, 3, 64, 48}, Layout::NCHW, 1), &rec);
      const std::vector<OpRecord> traced = trace_network(n, Shape{1, 3, 64, 48});
      REQUIRE(rec.records.size() == traced.size());
      for (std::size_t i = 0; i < traced.size(); ++i) {
        CHECK(rec.records[i].kind == traced[i].kind);
        CHECK(rec.records[i].scope == traced[i].scope);
        CHECK(rec.records[i].output == traced[i].output);
        CHECK(rec.records[i].macs == traced[i].macs);
      }
    }
  }
}

TEST_CASE("BN calibration normalizes activations") {
  Network net = build_repghostnet(0.5, true, 6);
  const Tensor y = network_forward(net, tensor_from_seed(Shape{1, 3, 224, 224}, Layout::NCHW, 1));
  double m = 0.0;
  for (float v : y.data()) m = std::max(m, static_cast<double>(std::fabs(v)));
  CHECK(m < 100.0);
  Network deploy = convert_network(net);
  CHECK_THROWS_AS(calibrate_batchnorm(deploy, Tensor(Shape{1, 3, 64, 64})), ConfigError);
}

TEST_CASE("parameter names are unique and BN entries vanish after conversion") {
  Network train = build_repghostnet(0.5, true, 0);
  Network deploy = convert_network(train);
  std::set<std::string> names;
  int bn = 0;
  for (const ParamRef& p : collect_params(train)) {
    CHECK(names.insert(p.name).second);
    bn += is_bn_param(p.name) ? 1 : 0;
    std::size_t n = 1;
    for (int d : p.dims) n *= static_cast<std::size_t>(d);
    CHECK(n == p.data->size());
  }
  CHECK(bn > 0);
  for (const ParamRef& p : collect_params(deploy)) CHECK_FALSE(is_bn_param(p.name));
}

TEST_CASE("architecture table round trip") {
  const std::vector<BottleneckSpec> rows = repghostnet_rows();
  const std::string text = format_arch_table(rows);
  CHECK(parse_arch_table(text) == rows);
  CHECK(text.find("112^2x16") != std::string::npos);

  const std::vector<BottleneckSpec> two = parse_arch_table("# in mid out se stride\n112^2x16 8 16 0 1\n112^2x16 24 24 0 2 3\n");
  REQUIRE(two.size() == 2);
  CHECK(two[1] == BottleneckSpec{24, 24, false, 2, 3});
  CHECK_THROWS_AS(parse_arch_table("112^2x16 8 16 0 1\n112^2x32 8 16 0 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_arch_table("112^2x16 8 16 yes 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_arch_table(""), ConfigError);
}
