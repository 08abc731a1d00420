#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace caseforge {

inline constexpr const char* kToolVersion = "0.1.0";

// Every pipeline command leaves one of these behind; downstream commands
// use them to enforce stage order, and every artifact is attributable to
// exactly one manifest.
struct RunManifest {
  std::string command;
  std::string workflow_path;
  std::string workflow_hash;
  std::uint64_t seed = 0;
  std::string backend;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::map<std::string, std::int64_t> counts;
  std::string started_at;
  long wall_ms = 0;

  nlohmann::json to_json() const;
  void write(const std::filesystem::path& out_dir) const;

  static std::filesystem::path path_for(const std::filesystem::path& out_dir,
                                        const std::string& command);
  static bool exists(const std::filesystem::path& out_dir, const std::string& command);
  static RunManifest load(const std::filesystem::path& out_dir, const std::string& command);
};

// Fails with a stage-order error if `required` has not run into `out_dir`.
void require_stage(const std::filesystem::path& out_dir, const std::string& required,
                   const std::string& requested_by);

std::string now_iso8601();

}  // namespace caseforge
