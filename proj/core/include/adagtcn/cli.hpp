#pragma once

namespace adagtcn {

/// Entry point for the adagtcn command-line tool. Subcommands: train, eval,
/// inspect-graph, gen-synth, grad-check. Exit codes: 0 ok, 1 usage/config
/// error, 2 data error, 3 numerical failure.
int run_cli(int argc, const char* const* argv);

}  // namespace adagtcn
