// SPDX-License-Identifier: Apache-2.0
#include "littlebit/cli.hpp"

int main(int argc, char** argv) { return littlebit::run_cli(argc, argv); }
