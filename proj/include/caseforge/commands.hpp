#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "caseforge/workflow.hpp"

namespace caseforge {

// Shared flags for the pipeline subcommands. CLI values override the
// workflow; unset optionals fall back to it.
struct CommonOptions {
  std::filesystem::path workflow;
  std::filesystem::path out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> concurrency;
  std::string backend;  // profile name; empty = workflow default
  bool resume = false;
  bool force = false;  // break a stale output-directory lock
};

int cmd_ingest(const CommonOptions& options, const std::filesystem::path& cases_path,
               const std::string& format_override = "");
int cmd_generate(const CommonOptions& options);
int cmd_translate(const CommonOptions& options);
int cmd_judge(const CommonOptions& options);

struct DiversifyOptions {
  std::filesystem::path plan;  // optional preloaded plan with alternatives
};
int cmd_diversify(const CommonOptions& options, const DiversifyOptions& diversify = {});

struct EvalOptions {
  std::filesystem::path items;
  std::filesystem::path responses;  // optional JSONL {item_id, response}
  std::filesystem::path taxonomy;
  std::filesystem::path out_dir;
  std::string extractor = "rules";  // "rules" or a workflow backend name
  std::filesystem::path workflow;   // needed when extractor is a backend
  int resamples = 10000;
  int baseline_trials = 10000;
  std::uint64_t seed = 0;
  std::string label = "model";
  bool serial = false;
  bool force = false;
};
int cmd_eval(const EvalOptions& options);

struct BaselineOptions {
  std::filesystem::path items;
  std::filesystem::path out_dir;
  int trials = 100000;
  std::uint64_t seed = 0;
  bool serial = false;
  bool force = false;
};
int cmd_baseline(const BaselineOptions& options);

struct ReportOptions {
  std::filesystem::path out_dir;
};
int cmd_report(const ReportOptions& options);

// Guards an output directory against concurrent runs. Advisory only.
class OutDirLock {
 public:
  OutDirLock(const std::filesystem::path& out_dir, bool force);
  ~OutDirLock();
  OutDirLock(const OutDirLock&) = delete;
  OutDirLock& operator=(const OutDirLock&) = delete;

 private:
  std::filesystem::path lock_path_;
};

}  // namespace caseforge
