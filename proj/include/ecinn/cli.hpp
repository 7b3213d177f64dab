#pragma once

#include <string>
#include <vector>

namespace ecinn {

// Subcommands: gen, train, index, explain, eval. Config precedence is
// flags > config file (flat key=value, --config) > defaults.
// Exit codes: 0 success, 2 usage/input error, 3 numeric failure.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);  // args without the program name

}  // namespace ecinn
