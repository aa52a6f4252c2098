#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "sle/errors.hpp"
#include "sle/harness/config.hpp"
#include "sle/harness/suites.hpp"

namespace sle::harness {

/// 0 pass, 1 a verification failed, 2 bad usage or config, 3 numerical failure.
enum ExitCode : int { kPass = 0, kVerificationFailed = 1, kUsage = 2, kNumerical = 3 };
int exit_code(ErrorKind kind);

/// Pseudo-suite name for the worker-count determinism check.
inline constexpr const char* kDeterminismSuite = "determinism";

struct TaskRecord {
  std::string task;
  std::string status;  // pass | fail | error
  double seconds = 0.0;
  std::vector<std::string> files;
  std::string error;
};

/// out_dir/<name>-<hash>/run-<k> with k one past the last existing run, so
/// earlier runs are never overwritten.
class RunDir {
 public:
  RunDir(const ExperimentConfig& cfg, std::string command);

  const std::filesystem::path& path() const { return path_; }
  /// Writes `content` under the run dir and returns the relative name.
  std::string write(const std::string& name, const std::string& content);
  void record(TaskRecord task);
  /// manifest.json: hash, versions, command, per-task status and timings.
  void finish();

  const std::vector<TaskRecord>& tasks() const { return tasks_; }

 private:
  ExperimentConfig cfg_;
  std::string command_;
  std::filesystem::path path_;
  std::vector<TaskRecord> tasks_;
};

/// One CSV per kappa in the grid.
int cmd_trace(const ExperimentConfig& cfg, RunDir& run);
/// Runs the named suites (all suites and the determinism check when empty).
int cmd_verify(const ExperimentConfig& cfg, const std::vector<std::string>& suites, RunDir& run);
int cmd_scan_continuity(const ExperimentConfig& cfg, RunDir& run);
int cmd_capacity(const ExperimentConfig& cfg, RunDir& run);
int cmd_existence(const ExperimentConfig& cfg, RunDir& run);

/// error.json for an exception escaping a command.
nlohmann::json error_json(const std::exception& e);

}  // namespace sle::harness
