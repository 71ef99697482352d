#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "sonarfit/error.hpp"
#include "sonarfit/harness/config.hpp"

namespace sonarfit::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // failed self-test or precondition
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumeric = 4;

int exit_code(ErrorKind kind);

// Artifact layout under paths.work_dir. Directory names carry the hash of
// the config section the artifacts depend on:
//   data-<hash of "data">/clips/<domain>/s<subject>_<session>.{sfit,jsonl}
//   data-<hash of "data">/windows/<domain>.{sfwd,jsonl}
//   data-<hash of "data">/split.json
//   runs/<method>-<full hash>/{config.json,checkpoint.sfck,loss_log.csv,eval.json}
// and each directory holds a manifest.json naming its hash.
std::filesystem::path data_dir(const harness::ExperimentConfig& cfg);
std::filesystem::path run_dir(const harness::ExperimentConfig& cfg);

/// Full command line, argv[0] included. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sonarfit::cli
