// Copyright 2026 The chanprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "chanprune/cli.hpp"

int main(int argc, char** argv) { return chanprune::cli::main(argc, argv, std::cout, std::cerr); }
