#pragma once

#include <functional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "caseforge/chat_client.hpp"
#include "caseforge/conversation.hpp"
#include "caseforge/record.hpp"
#include "caseforge/workflow.hpp"

namespace caseforge {

// Failures are quarantined with their raw payload, never dropped silently.
struct QuarantineRecord {
  std::string case_id;
  std::string task;
  std::string language;
  std::string request_tag;
  std::string reason;
  std::string raw;

  nlohmann::json to_json() const;
};

struct GenerateOptions {
  std::string model_id = "mock-model";
  std::string timestamp;
  // Units already produced, skipped on resume: (case_id, task) pairs for
  // generation, (parent conv_id, language) pairs for translation.
  std::set<std::pair<std::string, std::string>> already_done;
};

struct GenerationResult {
  ConversationSet conversations;
  std::vector<QuarantineRecord> quarantined;
};

// Runs every enabled (case, task) unit through the backend and parses the
// output into turns. Units are processed by a bounded worker pool; the
// result is sorted so completion order never shows in the artifacts.
GenerationResult run_generation(const WorkflowConfig& config, const CaseRecordSet& cases,
                                ChatClient& client, const GenerateOptions& options = {});

// Fans English conversations out to the target languages, one variant per
// (conversation, language), translating each turn independently so a
// failure only quarantines that variant.
GenerationResult translate_set(const WorkflowConfig& config, const ConversationSet& english,
                               const std::vector<std::string>& languages, ChatClient& client,
                               const GenerateOptions& options = {});

std::string make_conv_id(const std::string& case_id, const std::string& task,
                         const std::string& language);

// Bounded pool over [0, count); fn must be safe to call concurrently.
void parallel_units(size_t count, int workers, const std::function<void(size_t)>& fn);

}  // namespace caseforge
