// Copyright (C) 2026 repghost-cpp authors
// SPDX-License-Identifier: Apache-2.0

#include "repghost/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "repghost/error.hpp"
#include "repghost/ops.hpp"

namespace repghost {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0, Clock::time_point t1) {
  return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

// Keeps the compiler from discarding results it can prove are unused.
template <class T>
inline void keep(const T& value) {
  asm volatile("" : : "g"(&value) : "memory");
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string shape_token(const Shape& s) {
  return std::to_string(s.n) + "x" + std::to_string(s.c) + "x" + std::to_string(s.h) + "x" + std::to_string(s.w);
}

Shape parse_shape_token(const std::string& text) {
  Shape s;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%dx%dx%dx%d%c", &s.n, &s.c, &s.h, &s.w, &tail) != 4) {
    throw FormatError("bad shape token '" + text + "'");
  }
  return s;
}

class KindTimer : public OpObserver {
 public:
  void on_op(const OpRecord& record, double ms) override { totals[record.kind] += ms; }
  std::map<OpKind, double> totals;
};

// Times the network at one batch size; appends the total entry and one entry
// per operator type. Returns the per-type shares.
std::map<OpKind, double> time_network(const Network& net, const BenchConfig& cfg, int batch, const std::string& label,
                                      BenchReport& report) {
  const Shape in{batch, net.input_channels(), cfg.input_hw, cfg.input_hw};
  const Tensor x = tensor_from_seed(in, cfg.layout, 1234);
  for (int i = 0; i < cfg.warmup; ++i) keep(network_forward(net, x));

  std::vector<double> total;
  std::map<OpKind, std::vector<double>> per_kind;
  for (int i = 0; i < cfg.iterations; ++i) {
    KindTimer timer;
    const auto t0 = Clock::now();
    const Tensor y = network_forward(net, x, &timer);
    total.push_back(elapsed_ms(t0, Clock::now()));
    keep(y);
    for (OpKind k : all_op_kinds()) per_kind[k].push_back(timer.totals.count(k) ? timer.totals[k] : 0.0);
  }

  const TimingStats ts = summarize(total);
  report.entries.push_back(
      BenchEntry{label, cfg.layout, in, batch, ts.mean_ms, ts.std_ms, ts.min_ms, ts.median_ms, -1.0});

  std::map<OpKind, TimingStats> kind_stats;
  double op_sum = 0.0;
  for (auto& [k, samples] : per_kind) {
    kind_stats[k] = summarize(samples);
    op_sum += kind_stats[k].mean_ms;
  }
  std::map<OpKind, double> shares;
  for (auto& [k, st] : kind_stats) {
    shares[k] = op_sum > 0.0 ? st.mean_ms / op_sum : 0.0;
    report.entries.push_back(BenchEntry{label + "/op:" + to_string(k), cfg.layout, in, batch, st.mean_ms, st.std_ms,
                                        st.min_ms, st.median_ms, shares[k]});
  }
  return shares;
}

}  // namespace

void BenchConfig::validate() const {
  if (iterations < 1) throw ConfigError("bench: iterations must be >= 1");
  if (warmup < 0) throw ConfigError("bench: warmup must be >= 0");
  if (threads != 1) throw ConfigError("bench: timed regions are single-threaded; threads must be 1");
  if (batch_sizes.empty()) throw ConfigError("bench: no batch sizes");
  for (int b : batch_sizes) {
    if (b < 1) throw ConfigError("bench: batch sizes must be >= 1");
  }
  if (input_hw < 32) throw ConfigError("bench: input_hw must be >= 32");
}

TimingStats summarize(const std::vector<double>& samples_ms) {
  TimingStats s;
  if (samples_ms.empty()) return s;
  const double n = static_cast<double>(samples_ms.size());
  s.mean_ms = std::accumulate(samples_ms.begin(), samples_ms.end(), 0.0) / n;
  double var = 0.0;
  for (double v : samples_ms) var += (v - s.mean_ms) * (v - s.mean_ms);
  s.std_ms = samples_ms.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  s.min_ms = *std::min_element(samples_ms.begin(), samples_ms.end());
  std::vector<double> sorted(samples_ms);
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  s.median_ms = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  // mean >= min can be violated by a rounding ulp on constant samples
  s.mean_ms = std::max(s.mean_ms, s.min_ms);
  return s;
}

const BenchSummary* BenchReport::summary(const std::string& label, int batch) const {
  for (const BenchSummary& s : summaries) {
    if (s.label == label && s.batch == batch) return &s;
  }
  return nullptr;
}

std::string environment_description() {
  std::string env = "threads=1";
#if defined(__clang__)
  env += " compiler=clang-" + std::to_string(__clang_major__);
#elif defined(__GNUC__)
  env += " compiler=gcc-" + std::to_string(__GNUC__);
#endif
#if defined(NDEBUG)
  env += " build=release";
#else
  env += " build=debug";
#endif
#if defined(__x86_64__)
  env += " arch=x86_64";
#elif defined(__aarch64__)
  env += " arch=aarch64";
#endif
  return env;
}

BenchEntry bench_operator(const std::string& op, Shape a, Shape b, const BenchConfig& cfg) {
  cfg.validate();
  validate_shape(a);
  validate_shape(b);
  Shape out_shape;
  if (op == "add") {
    if (!(a == b)) throw ShapeError("bench add: shapes differ " + to_string(a) + " vs " + to_string(b));
    out_shape = a;
  } else if (op == "concat") {
    if (a.n != b.n || a.h != b.h || a.w != b.w) {
      throw ShapeError("bench concat: n/h/w differ " + to_string(a) + " vs " + to_string(b));
    }
    out_shape = Shape{a.n, a.c + b.c, a.h, a.w};
  } else {
    throw ConfigError("bench: unknown operator '" + op + "'");
  }

  const Tensor ta = tensor_from_seed(a, cfg.layout, 11);
  const Tensor tb = tensor_from_seed(b, cfg.layout, 12);
  Tensor out = Tensor::filled(out_shape, 0.0f, cfg.layout);
  const bool is_add = op == "add";
  auto run = [&] {
    if (is_add) {
      add_into(ta, tb, out);
    } else {
      concat_into(ta, tb, out);
    }
    keep(out.data()[0]);
  };

  for (int i = 0; i < cfg.warmup; ++i) run();
  std::vector<double> samples;
  samples.reserve(cfg.iterations);
  for (int i = 0; i < cfg.iterations; ++i) {
    const auto t0 = Clock::now();
    run();
    samples.push_back(elapsed_ms(t0, Clock::now()));
  }
  const TimingStats s = summarize(samples);
  return BenchEntry{op, cfg.layout, a, a.n, s.mean_ms, s.std_ms, s.min_ms, s.median_ms, -1.0};
}

BenchReport bench_concat_vs_add_suite(const Network& ghost_net, const BenchConfig& cfg) {
  cfg.validate();
  BenchReport report;
  report.environment = environment_description();
  const std::vector<ConcatSite> sites = enumerate_concat_sites(ghost_net);
  if (sites.empty()) {
    report.notes.push_back("network has no concatenation sites; nothing to compare");
    return report;
  }
  for (int batch : cfg.batch_sizes) {
    double concat_total = 0.0;
    double add_total = 0.0;
    for (const ConcatSite& site : sites) {
      Shape a = site.first;
      Shape b = site.second;
      a.n = batch;
      b.n = batch;
      BenchEntry c = bench_operator("concat", a, b, cfg);
      BenchEntry d = bench_operator("add", a, b, cfg);
      c.label = "concat:" + site.scope;
      d.label = "add:" + site.scope;
      concat_total += c.mean_ms;
      add_total += d.mean_ms;
      report.entries.push_back(c);
      report.entries.push_back(d);
    }
    BenchSummary s;
    s.label = "concat_vs_add";
    s.batch = batch;
    s.values["sites"] = static_cast<double>(sites.size());
    s.values["concat_total_ms"] = concat_total;
    s.values["add_total_ms"] = add_total;
    s.values["ratio"] = add_total > 0.0 ? concat_total / add_total : 0.0;
    report.summaries.push_back(s);
  }
  return report;
}

BenchReport bench_network(const Network& net, const BenchConfig& cfg, const std::string& label, const Network* paired,
                          const std::string& paired_label) {
  cfg.validate();
  BenchReport report;
  report.environment = environment_description();
  for (int batch : cfg.batch_sizes) {
    const auto shares = time_network(net, cfg, batch, label, report);
    if (paired == nullptr) continue;
    const auto paired_shares = time_network(*paired, cfg, batch, paired_label, report);
    BenchSummary s;
    s.label = "concat_vs_add_share";
    s.batch = batch;
    s.values["share_concat"] = shares.at(OpKind::Concat);
    s.values["share_add"] = paired_shares.at(OpKind::Add);
    s.values["diff"] = s.values["share_concat"] - s.values["share_add"];
    report.summaries.push_back(s);
  }
  return report;
}

double operator_time_share(const BenchReport& report, const std::string& op_type, const std::string& label,
                           int batch) {
  const std::string prefix = label + "/op:";
  double total = 0.0;
  double matched = 0.0;
  for (const BenchEntry& e : report.entries) {
    if (e.label.rfind(prefix, 0) != 0) continue;
    if (batch < 0) batch = e.batch;
    if (e.batch != batch) continue;
    total += e.mean_ms;
    if (e.label.substr(prefix.size()) == op_type) matched += e.mean_ms;
  }
  return total > 0.0 ? matched / total : 0.0;
}

std::string report_to_text(const BenchReport& report) {
  std::ostringstream out;
  out << "env " << report.environment << "\n";
  for (const std::string& n : report.notes) out << "note " << n << "\n";
  for (const BenchEntry& e : report.entries) {
    out << "entry label=" << e.label << " layout=" << to_string(e.layout) << " shape=" << shape_token(e.shape)
        << " batch=" << e.batch << " mean_ms=" << format_double(e.mean_ms) << " std_ms=" << format_double(e.std_ms)
        << " min_ms=" << format_double(e.min_ms) << " median_ms=" << format_double(e.median_ms)
        << " share=" << format_double(e.share) << "\n";
  }
  for (const BenchSummary& s : report.summaries) {
    out << "summary label=" << s.label << " batch=" << s.batch;
    for (const auto& [k, v] : s.values) out << " " << k << "=" << format_double(v);
    out << "\n";
  }
  return out.str();
}

BenchReport report_from_text(const std::string& text) {
  BenchReport report;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto space = line.find(' ');
    const std::string tag = line.substr(0, space);
    const std::string rest = space == std::string::npos ? "" : line.substr(space + 1);
    if (tag == "env") {
      report.environment = rest;
      continue;
    }
    if (tag == "note") {
      report.notes.push_back(rest);
      continue;
    }
    std::map<std::string, std::string> kv;
    std::istringstream fields(rest);
    std::string field;
    while (fields >> field) {
      const auto eq = field.find('=');
      if (eq == std::string::npos) throw FormatError("report line without key=value: '" + field + "'");
      kv[field.substr(0, eq)] = field.substr(eq + 1);
    }
    auto take = [&](const std::string& key) {
      const auto it = kv.find(key);
      if (it == kv.end()) throw FormatError("report " + tag + " line missing '" + key + "'");
      std::string v = it->second;
      kv.erase(it);
      return v;
    };
    if (tag == "entry") {
      BenchEntry e;
      e.label = take("label");
      e.layout = parse_layout(take("layout"));
      e.shape = parse_shape_token(take("shape"));
      e.batch = std::stoi(take("batch"));
      e.mean_ms = std::stod(take("mean_ms"));
      e.std_ms = std::stod(take("std_ms"));
      e.min_ms = std::stod(take("min_ms"));
      e.median_ms = std::stod(take("median_ms"));
      e.share = std::stod(take("share"));
      report.entries.push_back(e);
    } else if (tag == "summary") {
      BenchSummary s;
      s.label = take("label");
      s.batch = std::stoi(take("batch"));
      for (const auto& [k, v] : kv) s.values[k] = std::stod(v);
      report.summaries.push_back(s);
    } else {
      throw FormatError("unknown report record '" + tag + "'");
    }
  }
  return report;
}

std::string report_to_json(const BenchReport& report) {
  nlohmann::json j;
  j["environment"] = report.environment;
  j["notes"] = report.notes;
  j["entries"] = nlohmann::json::array();
  for (const BenchEntry& e : report.entries) {
    j["entries"].push_back({{"label", e.label},
                            {"layout", to_string(e.layout)},
                            {"shape", {e.shape.n, e.shape.c, e.shape.h, e.shape.w}},
                            {"batch", e.batch},
                            {"mean_ms", e.mean_ms},
                            {"std_ms", e.std_ms},
                            {"min_ms", e.min_ms},
                            {"median_ms", e.median_ms},
                            {"share", e.share}});
  }
  j["summaries"] = nlohmann::json::array();
  for (const BenchSummary& s : report.summaries) {
    j["summaries"].push_back({{"label", s.label}, {"batch", s.batch}, {"values", s.values}});
  }
  return j.dump(2);
}

BenchReport report_from_json(const std::string& text) {
  BenchReport report;
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    report.environment = j.at("environment").get<std::string>();
    report.notes = j.at("notes").get<std::vector<std::string>>();
    for (const auto& e : j.at("entries")) {
      BenchEntry b;
      b.label = e.at("label").get<std::string>();
      b.layout = parse_layout(e.at("layout").get<std::string>());
      const auto dims = e.at("shape").get<std::vector<int>>();
      if (dims.size() != 4) throw FormatError("report shape must have 4 dims");
      b.shape = Shape{dims[0], dims[1], dims[2], dims[3]};
      b.batch = e.at("batch").get<int>();
      b.mean_ms = e.at("mean_ms").get<double>();
      b.std_ms = e.at("std_ms").get<double>();
      b.min_ms = e.at("min_ms").get<double>();
      b.median_ms = e.at("median_ms").get<double>();
      b.share = e.at("share").get<double>();
      report.entries.push_back(b);
    }
    for (const auto& s : j.at("summaries")) {
      BenchSummary b;
      b.label = s.at("label").get<std::string>();
      b.batch = s.at("batch").get<int>();
      b.values = s.at("values").get<std::map<std::string, double>>();
      report.summaries.push_back(b);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad report json: ") + e.what());
  }
  return report;
}

}  // namespace repghost
