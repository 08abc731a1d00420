#pragma once

#include <map>
#include <string>
#include <vector>

#include "caseforge/chat_client.hpp"
#include "caseforge/conversation.hpp"
#include "caseforge/generate.hpp"
#include "caseforge/record.hpp"
#include "caseforge/workflow.hpp"

namespace caseforge {

// Parses a judge response into the three rubric scores. Tolerates prose
// around the JSON object; rejects out-of-range scores.
JudgeVerdict parse_verdict(const std::string& raw);

// Renders the rubric template against the source report and the
// conversation text, then scores via the backend. English only.
JudgeVerdict judge_conversation(const Conversation& conv, const CaseRecord& source,
                                const WorkflowConfig& config, ChatClient& client,
                                const GenerateOptions& options = {});

struct JudgeOutcome {
  std::map<std::string, JudgeVerdict> verdicts;  // conv_id -> verdict
  std::vector<QuarantineRecord> unjudged;        // parse failures, backend failures
};

// Scores every English conversation in the set. `sources` maps case_id to
// its record; a conversation without a source is marked unjudged.
JudgeOutcome judge_set(const WorkflowConfig& config, const ConversationSet& set,
                       const std::map<std::string, const CaseRecord*>& sources,
                       ChatClient& client, const GenerateOptions& options = {});

struct QualityThresholds {
  int keep_threshold = 3;      // groundedness floor, inclusive
  bool discard_unjudged = true;
};

struct QualityFilterResult {
  ConversationSet kept;
  ConversationSet discarded;
  std::map<std::string, std::string> discard_reasons;  // conv_id -> reason
  nlohmann::json report() const;

  int keep_threshold_used = 3;
};

// Keeps an English conversation iff constraint_adherence = 1 and
// groundedness >= keep_threshold. Discarding an English parent discards
// every conversation whose parent_id points at it.
QualityFilterResult apply_quality_filter(const ConversationSet& set,
                                         const std::map<std::string, JudgeVerdict>& verdicts,
                                         const QualityThresholds& thresholds = {});

}  // namespace caseforge
