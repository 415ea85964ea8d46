// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "fhirforge/cli.hpp"

int main(int argc, char** argv) {
    return fhirforge::cli::run_cli(argc, argv, std::cout, std::cerr);
}
