#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "caseforge/chat_client.hpp"
#include "caseforge/ingest.hpp"
#include "caseforge/prompt_template.hpp"

namespace caseforge {

struct BackendProfile {
  std::string name;
  std::string kind = "mock";  // mock | http | cassette_record | cassette_replay
  std::string url;
  std::string model_id = "mock-model";
  std::string api_key_env;
  int attempts = 5;
  long base_delay_ms = 1000;
  long max_delay_ms = 60000;
  long timeout_ms = 60000;
  std::string cassette;  // JSONL store for the cassette kinds
};

struct TaskSpec {
  std::string name;           // one of the seven conversational categories
  std::string template_name;  // must resolve in WorkflowConfig::templates
  std::string question;       // user turn used when the model answers in bare text
  bool enabled = true;
};

// The declarative run description. Everything a pipeline stage needs comes
// from here plus the CLI overrides; defaults follow the documented values
// (judge keep-threshold 3, four tiers at 30/50/70/90%, 20 alternatives).
struct WorkflowConfig {
  int schema_version = 1;
  std::uint64_t seed = 0;
  int concurrency = 4;
  bool allow_blank = false;  // render policy for generation prompts

  std::vector<std::string> languages;  // translation targets; English is the source

  std::map<std::string, PromptTemplate> templates;
  std::vector<TaskSpec> tasks;

  std::map<std::string, BackendProfile> backends;
  std::string default_backend = "mock";

  std::string judge_template = "judge";
  int keep_threshold = 3;
  std::string unjudged_fate = "discard";  // discard | keep

  std::string translate_template = "translate";
  std::string diversify_template = "diversify";
  size_t min_frequency = 100;
  int tiers = 4;
  std::vector<double> tier_rates = {0.30, 0.50, 0.70, 0.90};
  int alternatives_count = 20;

  SourceFormat ingest_format = SourceFormat::kCsv;
  FieldMap field_map;
  std::vector<std::string> filter_stages = FilterPolicy::standard().stages;

  double generation_temperature = 0.7;
  double judge_temperature = 0.0;
  double translation_temperature = 0.3;

  std::filesystem::path source_path;
  std::string content_hash;  // of the workflow file bytes

  const PromptTemplate& require_template(const std::string& name) const;
  const BackendProfile& require_backend(const std::string& name) const;
  std::vector<TaskSpec> enabled_tasks() const;
};

const std::set<std::string>& known_task_names();

WorkflowConfig load_workflow(const std::filesystem::path& path);

// Instantiates the backend described by a profile. Cassette kinds resolve
// the store path relative to the workflow file.
std::shared_ptr<ChatBackend> make_backend(const WorkflowConfig& config,
                                          const BackendProfile& profile);

}  // namespace caseforge
