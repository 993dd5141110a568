// Copyright (C) 2026 repghost-cpp authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>

namespace repghost {

inline constexpr int kExitOk = 0;
inline constexpr int kExitVerifyFailed = 1;
inline constexpr int kExitUsage = 2;

// Entry point behind the `repghost` binary. Output goes to `out`, diagnostics
// and help text on errors to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace repghost
