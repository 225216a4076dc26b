#pragma once

#include <string>
#include <vector>

namespace tac {

/// Entry point behind the `tac` binary. Subcommands: gen-codes, train, eval,
/// reject, ood, capacity, layers. Exit codes: 0 success, 2 config/usage
/// errors, 3 numeric failures.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

}  // namespace tac
