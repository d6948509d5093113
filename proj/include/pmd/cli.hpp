#pragma once

#include <string>
#include <vector>

namespace pmd {

// Full command-line tool: run, sweep-alpha, compare-schedulers, dump-corpus,
// eval-checkpoint. Returns the process exit code (0 ok, 1 configuration or
// usage error, 2 training aborted).
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);  // args without argv[0]

}  // namespace pmd
