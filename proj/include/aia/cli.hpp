#pragma once

namespace aia {

// Entry point of the command-line tool (subcommands: generate, train, eval,
// bench, attn). Returns 0 on success, 1 on usage/config errors, 2 on
// runtime errors.
int run_cli(int argc, const char* const* argv);

}  // namespace aia
