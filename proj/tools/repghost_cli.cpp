// Copyright (C) 2026 repghost-cpp authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "repghost/cli.hpp"

int main(int argc, char** argv) {
  return repghost::run_cli(argc, argv, std::cout, std::cerr);
}
