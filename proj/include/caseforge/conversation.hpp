#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "caseforge/verdict.hpp"

namespace caseforge {

struct Turn {
  std::string role;
  std::string content;
};

struct Provenance {
  std::string model_id;
  std::string template_name;
  std::string timestamp;
  std::string request_tag;
};

// One generated chat instance. Translations carry parent_id pointing at
// their English variant and share its case_id and task.
struct Conversation {
  std::string conv_id;
  std::string case_id;
  std::string task;
  std::string language = "en";
  std::optional<std::string> parent_id;
  std::vector<Turn> turns;
  Provenance provenance;
  std::optional<JudgeVerdict> verdict;

  nlohmann::json to_json() const;  // verdict excluded; it lives in a sidecar
};

Conversation conversation_from_json(const nlohmann::json& row);

struct ConversationSet {
  std::vector<Conversation> conversations;

  size_t size() const { return conversations.size(); }
  bool empty() const { return conversations.empty(); }
  void sort_canonical();  // (case_id, task, language, conv_id)
};

// Optional leading system turn, then strict user/assistant alternation
// starting with user. Throws Error("alternation") on violation.
void check_alternation(const std::vector<Turn>& turns);

// Tolerant extraction of a model-emitted conversation. Strips markdown
// fences, slices the outermost JSON value and validates the turn schema.
// Single-turn tasks accept bare text as the assistant answer to `question`.
std::vector<Turn> parse_conversation(const std::string& raw, const std::string& task,
                                     const std::string& question = "");

bool is_single_turn_task(const std::string& task);

// Locates the first '{' or '[' and returns the substring to its matching
// close, honouring JSON string quoting. Empty when nothing is found.
std::string slice_outer_json(const std::string& text);

}  // namespace caseforge
