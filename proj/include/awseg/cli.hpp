#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace awseg::cli {

enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitData = 3, kExitPrerequisite = 4 };

inline constexpr const char* kToolVersion = "0.1.0";

/// Written next to every run output. `config_file` names a sibling file that
/// `--config` accepts, so a run can be repeated from the manifest alone.
struct RunManifest {
  std::string command;
  std::uint64_t seed = 0;
  std::string config_file;
  std::uint64_t config_hash = 0;
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
  std::map<std::string, std::string> flags;
  std::vector<std::pair<std::string, double>> timings;  // seconds

  std::string serialize() const;
};

/// File names inside a training work directory.
struct WorkLayout {
  static std::string checkpoint(int stage);  // stage0.ckpt, stage1_best.ckpt, ...
  static std::string metrics(int stage);
  static std::string manifest(int stage);
  static std::string config(int stage);
};

/// Runs one command line (without the program name). Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace awseg::cli
