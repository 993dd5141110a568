// Copyright (C) 2026 repghost-cpp authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <sstream>
#include <string>

#include "repghost/error.hpp"
#include "repghost/network.hpp"

namespace repghost {

std::vector<BottleneckSpec> parse_arch_table(const std::string& text, int stem_channels, int input_hw) {
  std::vector<BottleneckSpec> rows;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  int expect_hw = input_hw / 2;  // after the stride-2 stem
  int expect_c = stem_channels;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string size;
    if (!(fields >> size)) continue;

    int hw = 0, hw2 = 0, c = 0;
    char tail = 0;
    if (std::sscanf(size.c_str(), "%d^2x%d%c", &hw, &c, &tail) != 2 &&
        std::sscanf(size.c_str(), "%dx%dx%d%c", &hw, &hw2, &c, &tail) != 3) {
      throw ConfigError("arch table line " + std::to_string(line_no) + ": bad input size '" + size +
                        "' (expected like 112^2x16)");
    }
    if (hw2 != 0 && hw2 != hw) throw ConfigError("arch table line " + std::to_string(line_no) + ": non-square input");

    BottleneckSpec row;
    int se = 0;
    if (!(fields >> row.mid >> row.out >> se >> row.stride)) {
      throw ConfigError("arch table line " + std::to_string(line_no) + ": expected <input> <#mid> <#out> <se> <stride>");
    }
    row.use_se = se != 0;
    int kernel = 0;
    if (fields >> kernel) row.dw_kernel = kernel;
    std::string extra;
    if (fields >> extra) throw ConfigError("arch table line " + std::to_string(line_no) + ": trailing '" + extra + "'");

    if (hw != expect_hw || c != expect_c) {
      throw ConfigError("arch table line " + std::to_string(line_no) + ": input " + size + " does not follow the previous row (expected " +
                        std::to_string(expect_hw) + "^2x" + std::to_string(expect_c) + ")");
    }
    if (row.stride != 1 && row.stride != 2) {
      throw ConfigError("arch table line " + std::to_string(line_no) + ": stride must be 1 or 2");
    }
    rows.push_back(row);
    expect_c = row.out;
    expect_hw = (expect_hw + row.stride - 1) / row.stride;
  }
  if (rows.empty()) throw ConfigError("arch table has no rows");
  return rows;
}

std::string format_arch_table(const std::vector<BottleneckSpec>& rows, int stem_channels, int input_hw) {
  std::ostringstream out;
  out << "# input  #mid  #out  se  stride  dw_kernel\n";
  int hw = input_hw / 2;
  int c = stem_channels;
  for (const BottleneckSpec& r : rows) {
    const std::string size = std::to_string(hw) + "^2x" + std::to_string(c);
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%-9s %4d %5d %3d %7d %10d\n", size.c_str(), r.mid, r.out, r.use_se ? 1 : 0,
                  r.stride, r.dw_kernel);
    out << buf;
    c = r.out;
    hw = (hw + r.stride - 1) / r.stride;
  }
  return out.str();
}

}  // namespace repghost
