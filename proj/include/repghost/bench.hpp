// Copyright (C) 2026 repghost-cpp authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include "repghost/network.hpp"
#include "repghost/tensor.hpp"

namespace repghost {

struct BenchConfig {
  int iterations = 100;
  int warmup = 10;
  std::vector<int> batch_sizes{1, 2, 8, 32};
  Layout layout = Layout::NCHW;
  int threads = 1;
  int input_hw = 224;  // network benchmarks only

  void validate() const;
};

struct TimingStats {
  double mean_ms = 0.0;
  double std_ms = 0.0;
  double min_ms = 0.0;
  double median_ms = 0.0;
};

TimingStats summarize(const std::vector<double>& samples_ms);

/// One timed record. `share` is the fraction of summed operator time for
/// per-operator-type rows of a network benchmark and negative elsewhere.
struct BenchEntry {
  std::string label;
  Layout layout = Layout::NCHW;
  Shape shape;
  int batch = 1;
  double mean_ms = 0.0;
  double std_ms = 0.0;
  double min_ms = 0.0;
  double median_ms = 0.0;
  double share = -1.0;

  bool operator==(const BenchEntry&) const = default;
};

/// Per-batch derived numbers, e.g. concat/add totals and their ratio.
struct BenchSummary {
  std::string label;
  int batch = 1;
  std::map<std::string, double> values;

  bool operator==(const BenchSummary&) const = default;
};

struct BenchReport {
  std::string environment;
  std::vector<BenchEntry> entries;
  std::vector<BenchSummary> summaries;
  std::vector<std::string> notes;

  const BenchSummary* summary(const std::string& label, int batch) const;
  bool operator==(const BenchReport&) const = default;
};

std::string environment_description();

// op is "concat" or "add". Both inputs are allocated before timing starts,
// and so is the output buffer.
BenchEntry bench_operator(const std::string& op, Shape a, Shape b, const BenchConfig& cfg);

// Times concat(M1, M2) and add(M1, M2) for every concat site of a Ghost
// network at every configured batch size. Summaries labelled "concat_vs_add"
// carry concat_total_ms, add_total_ms and ratio.
BenchReport bench_concat_vs_add_suite(const Network& ghost_net, const BenchConfig& cfg);

// End-to-end forward timing plus per-operator-type breakdown ("<label>/op:<kind>").
// When `paired` is given (the add variant of a concat network), a
// "concat_vs_add_share" summary per batch holds share_concat, share_add and diff.
BenchReport bench_network(const Network& net, const BenchConfig& cfg, const std::string& label = "net",
                          const Network* paired = nullptr, const std::string& paired_label = "paired");

// Fraction of summed operator time spent in `op_type` for one network label and
// batch (batch < 0 picks the first batch present). 0 when the type is absent.
double operator_time_share(const BenchReport& report, const std::string& op_type, const std::string& label = "net",
                           int batch = -1);

// Line-oriented text form: one "entry" or "summary" record per line.
std::string report_to_text(const BenchReport& report);
BenchReport report_from_text(const std::string& text);
std::string report_to_json(const BenchReport& report);
BenchReport report_from_json(const std::string& text);

}  // namespace repghost
