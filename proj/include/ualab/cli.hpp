#pragma once

#include <string>
#include <vector>

namespace ualab {

// Experiment driver: generate-data, pretrain, evaluate, ablate, report.
// args excludes the program name. Returns a process exit code.
int run_cli(const std::vector<std::string>& args);

}  // namespace ualab
