#include "caseforge/manifest.hpp"

#include <chrono>
#include <ctime>

#include "caseforge/errors.hpp"
#include "caseforge/jsonl.hpp"

namespace caseforge {

using nlohmann::json;

json RunManifest::to_json() const {
  json counts_json = json::object();
  for (const auto& [key, value] : counts) counts_json[key] = value;
  return {{"command", command},
          {"version", kToolVersion},
          {"workflow", {{"path", workflow_path}, {"hash", workflow_hash}}},
          {"seed", seed},
          {"backend", backend},
          {"inputs", inputs},
          {"outputs", outputs},
          {"counts", counts_json},
          {"started_at", started_at},
          {"wall_ms", wall_ms}};
}

std::filesystem::path RunManifest::path_for(const std::filesystem::path& out_dir,
                                            const std::string& command) {
  return out_dir / ("manifest." + command + ".json");
}

void RunManifest::write(const std::filesystem::path& out_dir) const {
  jsonl::write_json_file(path_for(out_dir, command), to_json());
}

bool RunManifest::exists(const std::filesystem::path& out_dir, const std::string& command) {
  return std::filesystem::exists(path_for(out_dir, command));
}

RunManifest RunManifest::load(const std::filesystem::path& out_dir, const std::string& command) {
  const json doc = jsonl::read_json_file(path_for(out_dir, command));
  RunManifest manifest;
  manifest.command = doc.value("command", command);
  manifest.workflow_path = doc.at("workflow").value("path", "");
  manifest.workflow_hash = doc.at("workflow").value("hash", "");
  manifest.seed = doc.value("seed", std::uint64_t{0});
  manifest.backend = doc.value("backend", "");
  const json inputs_json = doc.value("inputs", json::array());
  for (const json& input : inputs_json) {
    manifest.inputs.push_back(input.get<std::string>());
  }
  const json outputs_json = doc.value("outputs", json::array());
  for (const json& output : outputs_json) {
    manifest.outputs.push_back(output.get<std::string>());
  }
  if (doc.contains("counts")) {
    for (const auto& item : doc.at("counts").items()) {
      manifest.counts[item.key()] = item.value().get<std::int64_t>();
    }
  }
  manifest.started_at = doc.value("started_at", "");
  manifest.wall_ms = doc.value("wall_ms", 0L);
  return manifest;
}

void require_stage(const std::filesystem::path& out_dir, const std::string& required,
                   const std::string& requested_by) {
  if (!RunManifest::exists(out_dir, required)) {
    fail("stage_order", "'" + requested_by + "' requires '" + required +
                            "' artifacts in " + out_dir.string() + "; run '" + required +
                            "' first");
  }
}

std::string now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace caseforge
