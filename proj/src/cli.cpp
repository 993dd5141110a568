// Copyright (C) 2026 repghost-cpp authors
// SPDX-License-Identifier: Apache-2.0

#include "repghost/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "repghost/bench.hpp"
#include "repghost/error.hpp"
#include "repghost/network.hpp"
#include "repghost/weights_io.hpp"

namespace repghost {

namespace {

struct CliConfig {
  std::string arch = "repghost";
  double width = 1.0;
  bool no_shortcut = false;
  std::uint64_t seed = 0;
  std::string variant = "bn";
  std::string arch_table;
  std::string layout = "nchw";
  std::vector<int> batch_sizes;
  int iters = -1;
  int warmup = 10;
  std::string input_hw = "224";
  std::string weights;
  std::string out;
  std::string format = "text";
  std::string form = "deploy";
  int trials = 5;
  double tol = 1e-4;
  int batch = 1;
};

std::pair<int, int> parse_hw(const std::string& text) {
  int h = 0, w = 0;
  char sep = 0, tail = 0;
  std::istringstream in(text);
  if (!(in >> h)) throw ConfigError("--input-hw: expected H or H,W, got '" + text + "'");
  w = h;
  if (in >> sep) {
    if ((sep != ',' && sep != 'x') || !(in >> w) || (in >> tail)) {
      throw ConfigError("--input-hw: expected H or H,W, got '" + text + "'");
    }
  }
  if (h < 32 || w < 32) throw ConfigError("--input-hw: spatial size must be >= 32");
  return {h, w};
}

int env_threads() {
  const char* v = std::getenv("REPGHOST_THREADS");
  if (v == nullptr) return 1;
  const int n = std::atoi(v);
  return n > 0 ? n : 1;
}

NetworkSpec spec_from(const CliConfig& c) {
  const Arch arch = parse_arch(c.arch);
  NetworkSpec spec = arch == Arch::RepGhost ? NetworkSpec::repghostnet(c.width, !c.no_shortcut)
                                            : NetworkSpec::ghostnet(c.width);
  spec.use_shortcut = !c.no_shortcut;
  if (arch == Arch::RepGhost) {
    bool found = false;
    for (const ReparamVariant& v : ablation_variants()) {
      if (v.name == c.variant) {
        spec.variant = v;
        found = true;
      }
    }
    if (!found) throw ConfigError("unknown --variant '" + c.variant + "'");
  }
  if (!c.arch_table.empty()) {
    std::ifstream in(c.arch_table);
    if (!in) throw IoError("cannot open arch table '" + c.arch_table + "'");
    std::stringstream text;
    text << in.rdbuf();
    spec.rows = parse_arch_table(text.str(), spec.stem_channels);
  }
  spec.validate();
  return spec;
}

Network network_from(const CliConfig& c) {
  const NetworkSpec spec = spec_from(c);
  if (!c.weights.empty()) return load_archive(c.weights, spec);
  return build_network(spec, c.seed);
}

std::string millions(std::int64_t v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(3) << static_cast<double>(v) / 1e6 << "M";
  return s.str();
}

int cmd_count(const CliConfig& c, std::ostream& out) {
  const Network net = network_from(c);
  const auto hw = parse_hw(c.input_hw);
  const std::int64_t params_train = count_params(net, false);
  const std::int64_t params_fused = count_params(net, true);
  const std::int64_t flops_train = count_flops(net, hw, false);
  const std::int64_t flops_fused = count_flops(net, hw, true);
  if (c.format == "machine") {
    nlohmann::json j{{"arch", c.arch},
                     {"width", c.width},
                     {"input_hw", {hw.first, hw.second}},
                     {"params_train", params_train},
                     {"params_fused", params_fused},
                     {"flops_train", flops_train},
                     {"flops_fused", flops_fused}};
    out << j.dump() << "\n";
  } else {
    out << c.arch << " " << c.width << "x @" << hw.first << "x" << hw.second << "\n";
    out << "params train=" << params_train << " (" << millions(params_train) << ") fused=" << params_fused << " ("
        << millions(params_fused) << ")\n";
    out << "flops  train=" << flops_train << " (" << millions(flops_train) << ") fused=" << flops_fused << " ("
        << millions(flops_fused) << ")\n";
  }
  return kExitOk;
}

int cmd_convert(const CliConfig& c, std::ostream& out) {
  if (c.out.empty()) throw ConfigError("convert: --out is required");
  const Network net = network_from(c);
  const Network deploy = convert_network(net);
  save_archive(deploy, c.out);
  out << "wrote deploy archive " << c.out << " (" << archive_scalar_count(c.out) << " scalars)\n";
  return kExitOk;
}

int cmd_verify(const CliConfig& c, std::ostream& out) {
  const Network train = network_from(c);
  const Network deploy = convert_network(train);
  const auto hw = parse_hw(c.input_hw);
  if (c.batch < 1) throw ConfigError("verify: --batch must be >= 1");
  const int threads = env_threads();
  const EquivalenceReport r = verify_equivalence(
      [&](const Tensor& x) { return network_forward(train, x, nullptr, threads); },
      [&](const Tensor& x) { return network_forward(deploy, x, nullptr, threads); },
      Shape{c.batch, 3, hw.first, hw.second}, c.trials, c.tol, c.seed);
  if (c.format == "machine") {
    nlohmann::json j{{"arch", c.arch},       {"width", c.width},   {"trials", r.trials},
                     {"max_diff", r.max_diff}, {"tolerance", r.tolerance}, {"passed", r.passed}};
    out << j.dump() << "\n";
  } else {
    out << "verify " << c.arch << " " << c.width << "x trials=" << r.trials << " max_diff=" << std::scientific
        << std::setprecision(3) << r.max_diff << " tol=" << r.tolerance << std::defaultfloat << " -> "
        << (r.passed ? "PASS" : "FAIL") << "\n";
  }
  return r.passed ? kExitOk : kExitVerifyFailed;
}

BenchConfig bench_config(const CliConfig& c, std::vector<int> default_batches, int default_iters) {
  BenchConfig cfg;
  cfg.layout = parse_layout(c.layout);
  cfg.batch_sizes = c.batch_sizes.empty() ? std::move(default_batches) : c.batch_sizes;
  cfg.iterations = c.iters > 0 ? c.iters : default_iters;
  cfg.warmup = c.warmup;
  cfg.input_hw = parse_hw(c.input_hw).first;
  cfg.validate();
  return cfg;
}

void emit_report(const BenchReport& report, const CliConfig& c, std::ostream& out) {
  const std::string text = c.format == "machine" ? report_to_json(report) + "\n" : report_to_text(report);
  if (!c.out.empty()) {
    std::ofstream f(c.out);
    if (!f) throw IoError("cannot write '" + c.out + "'");
    f << text;
  }
  out << text;
}

int cmd_bench_op(const CliConfig& c, std::ostream& out) {
  const Network net = network_from(c);
  const BenchConfig cfg = bench_config(c, {1, 2, 8, 32}, 100);
  emit_report(bench_concat_vs_add_suite(net, cfg), c, out);
  return kExitOk;
}

int cmd_bench_net(const CliConfig& c, std::ostream& out) {
  const Network net = network_from(c);
  const BenchConfig cfg = bench_config(c, {1}, 100);
  const Network timed = c.form == "train" ? net : convert_network(net);
  BenchReport report;
  if (net.spec.arch == Arch::Ghost && net.spec.reuse == ReuseOp::Concat) {
    // pair with the add variant of the same network
    NetworkSpec add_spec = net.spec;
    add_spec.reuse = ReuseOp::Add;
    Network add_net = build_network(add_spec, c.seed);
    if (c.form != "train") add_net = convert_network(add_net);
    report = bench_network(timed, cfg, "ghost-concat", &add_net, "ghost-add");
  } else {
    report = bench_network(timed, cfg, c.arch + "-" + c.form);
  }
  emit_report(report, c, out);
  return kExitOk;
}

int cmd_export(const CliConfig& c, std::ostream& out) {
  if (c.out.empty()) throw ConfigError("export: --out is required");
  Network net = network_from(c);
  if (c.form == "deploy") net = convert_network(net);
  save_archive(net, c.out);
  out << "wrote " << to_string(net.form) << " archive " << c.out << " (" << archive_scalar_count(c.out)
      << " scalars)\n";
  return kExitOk;
}

int cmd_import(const CliConfig& c, std::ostream& out) {
  if (c.weights.empty()) throw ConfigError("import: --weights is required");
  const Network net = load_archive(c.weights, spec_from(c));
  const ArchiveManifest m = read_manifest(c.weights);
  int bn_entries = 0;
  for (const ArchiveEntry& e : m.entries) bn_entries += is_bn_param(e.name) ? 1 : 0;
  if (c.format == "machine") {
    nlohmann::json j{{"form", to_string(net.form)},
                     {"tensors", m.entries.size()},
                     {"bn_tensors", bn_entries},
                     {"scalars", archive_scalar_count(c.weights)},
                     {"params", count_params(net, false)}};
    out << j.dump() << "\n";
  } else {
    out << "loaded " << to_string(net.form) << " " << to_string(net.spec.arch) << " network: " << m.entries.size()
        << " tensors (" << bn_entries << " batch-norm), " << archive_scalar_count(c.weights) << " scalars, "
        << count_params(net, false) << " learnable params\n";
  }
  if (!c.out.empty()) save_archive(net, c.out);
  return kExitOk;
}

void add_network_options(CLI::App* sub, CliConfig& c) {
  sub->add_option("--arch", c.arch, "Architecture")->check(CLI::IsMember({"repghost", "ghost"}));
  sub->add_option("--width", c.width, "Width multiplier");
  sub->add_flag("--no-shortcut", c.no_shortcut, "Drop identity shortcuts (downsample shortcuts stay)");
  sub->add_option("--seed", c.seed, "Initialization seed");
  sub->add_option("--variant", c.variant, "Re-parameterization branch set (RepGhost only)");
  sub->add_option("--arch-table", c.arch_table, "Architecture table file replacing the built-in rows");
  sub->add_option("--weights", c.weights, "Load parameters from an archive instead of seeding");
  sub->add_option("--input-hw", c.input_hw, "Input size H or H,W");
  sub->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"text", "machine"}));
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"RepGhost re-parameterization toolkit", "repghost"};
  app.require_subcommand(1);
  CliConfig c;

  auto* count = app.add_subcommand("count", "Parameter and FLOP counts (train and fused)");
  auto* convert = app.add_subcommand("convert", "Fuse a train-form network and write the deploy archive");
  auto* verify = app.add_subcommand("verify", "Check train-form vs deploy-form outputs");
  auto* bench_op = app.add_subcommand("bench-op", "Time concat vs add on every concat site");
  auto* bench_net = app.add_subcommand("bench-net", "Time a whole network with a per-operator breakdown");
  auto* exp = app.add_subcommand("export", "Write a weight archive");
  auto* imp = app.add_subcommand("import", "Load and check a weight archive");

  for (CLI::App* sub : {count, convert, verify, bench_op, bench_net, exp, imp}) add_network_options(sub, c);
  for (CLI::App* sub : {convert, bench_op, bench_net, exp, imp}) sub->add_option("--out", c.out, "Output path");
  verify->add_option("--trials", c.trials, "Random inputs to compare");
  verify->add_option("--tol", c.tol, "Maximum absolute difference");
  verify->add_option("--batch", c.batch, "Batch size of each trial input");
  for (CLI::App* sub : {bench_op, bench_net}) {
    sub->add_option("--layout", c.layout, "Tensor layout")->check(CLI::IsMember({"nchw", "nhwc"}));
    sub->add_option("--batch-sizes", c.batch_sizes, "Batch sizes")->delimiter(',');
    sub->add_option("--iters", c.iters, "Timed iterations");
    sub->add_option("--warmup", c.warmup, "Untimed warmup iterations");
  }
  for (CLI::App* sub : {bench_net, exp}) {
    sub->add_option("--form", c.form, "Network form")->check(CLI::IsMember({"train", "deploy"}));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (!(c.width > 0.0)) throw ConfigError("--width must be > 0");
    if (*count) return cmd_count(c, out);
    if (*convert) return cmd_convert(c, out);
    if (*verify) return cmd_verify(c, out);
    if (*bench_op) return cmd_bench_op(c, out);
    if (*bench_net) return cmd_bench_net(c, out);
    if (*exp) return cmd_export(c, out);
    if (*imp) return cmd_import(c, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ShapeError& e) {
    err << "shape error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace repghost
