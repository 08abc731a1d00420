#include "caseforge/conversation.hpp"

#include <algorithm>

#include "caseforge/errors.hpp"
#include "caseforge/strings.hpp"

namespace caseforge {

using nlohmann::json;

json JudgeVerdict::to_json() const {
  return {{"constraint_adherence", constraint_adherence},
          {"groundedness", groundedness},
          {"clarity", clarity},
          {"constraint_justification", constraint_justification},
          {"groundedness_justification", groundedness_justification},
          {"clarity_justification", clarity_justification},
          {"reasoning", reasoning},
          {"raw", raw}};
}

json Conversation::to_json() const {
  json messages = json::array();
  for (const auto& t : turns) {
    messages.push_back({{"role", t.role}, {"content", t.content}});
  }
  json row = {{"conv_id", conv_id},
              {"case_id", case_id},
              {"task", task},
              {"language", language},
              {"parent_id", parent_id ? json(*parent_id) : json(nullptr)},
              {"messages", messages},
              {"provenance",
               {{"model_id", provenance.model_id},
                {"template", provenance.template_name},
                {"timestamp", provenance.timestamp},
                {"request_tag", provenance.request_tag}}}};
  return row;
}

Conversation conversation_from_json(const json& row) {
  Conversation conv;
  conv.conv_id = row.at("conv_id").get<std::string>();
  conv.case_id = row.at("case_id").get<std::string>();
  conv.task = row.at("task").get<std::string>();
  conv.language = row.value("language", "en");
  if (row.contains("parent_id") && !row.at("parent_id").is_null()) {
    conv.parent_id = row.at("parent_id").get<std::string>();
  }
  for (const json& message : row.at("messages")) {
    conv.turns.push_back(
        {message.at("role").get<std::string>(), message.at("content").get<std::string>()});
  }
  if (row.contains("provenance")) {
    const json& p = row.at("provenance");
    conv.provenance.model_id = p.value("model_id", "");
    conv.provenance.template_name = p.value("template", "");
    conv.provenance.timestamp = p.value("timestamp", "");
    conv.provenance.request_tag = p.value("request_tag", "");
  }
  return conv;
}

void ConversationSet::sort_canonical() {
  std::sort(conversations.begin(), conversations.end(),
            [](const Conversation& a, const Conversation& b) {
              return std::tie(a.case_id, a.task, a.language, a.conv_id) <
                     std::tie(b.case_id, b.task, b.language, b.conv_id);
            });
}

void check_alternation(const std::vector<Turn>& turns) {
  if (turns.empty()) fail("alternation", "conversation has no turns");
  size_t i = 0;
  while (i < turns.size() && turns[i].role == "system") ++i;
  if (i > 1) fail("alternation", "more than one leading system turn");
  if (i == turns.size()) fail("alternation", "conversation has only system turns");
  for (size_t k = i; k < turns.size(); ++k) {
    const std::string expected = ((k - i) % 2 == 0) ? "user" : "assistant";
    if (turns[k].role != expected) {
      fail("alternation", "turn " + std::to_string(k) + " has role '" + turns[k].role +
                              "', expected '" + expected + "'");
    }
  }
}

bool is_single_turn_task(const std::string& task) {
  return task == "detailed_description" || task == "clean_report";
}

std::string slice_outer_json(const std::string& text) {
  size_t start = std::string::npos;
  for (size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '{' || text[i] == '[') {
      start = i;
      break;
    }
  }
  if (start == std::string::npos) return "";

  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (size_t i = start; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{' || c == '[') {
      ++depth;
    } else if (c == '}' || c == ']') {
      --depth;
      if (depth == 0) return text.substr(start, i - start + 1);
    }
  }
  return "";
}

namespace {

// Drops markdown code-fence lines; the fenced body stays.
std::string strip_fences(const std::string& raw) {
  if (raw.find("```") == std::string::npos) return raw;
  std::string out;
  out.reserve(raw.size());
  for (const std::string& line : strings::split(raw, '\n')) {
    if (strings::trim(line).rfind("```", 0) == 0) continue;
    out += line;
    out += '\n';
  }
  return out;
}

std::vector<Turn> turns_from_json(const json& value) {
  const json* array = &value;
  if (value.is_object()) {
    if (!value.contains("messages") || !value.at("messages").is_array()) {
      fail("schema", "conversation object has no 'messages' array");
    }
    array = &value.at("messages");
  }
  if (!array->is_array()) fail("schema", "conversation JSON is not an array of turns");
  std::vector<Turn> turns;
  for (const json& item : *array) {
    if (!item.is_object() || !item.contains("role") || !item.contains("content") ||
        !item.at("role").is_string() || !item.at("content").is_string()) {
      fail("schema", "turn is not an object with string 'role' and 'content'");
    }
    turns.push_back({item.at("role").get<std::string>(), item.at("content").get<std::string>()});
  }
  return turns;
}

}  // namespace

std::vector<Turn> parse_conversation(const std::string& raw, const std::string& task,
                                     const std::string& question) {
  if (strings::is_blank(raw)) fail("schema", "model output is empty");

  const std::string cleaned = strip_fences(raw);
  const std::string slice = slice_outer_json(cleaned);

  if (slice.empty()) {
    if (!is_single_turn_task(task)) {
      fail("no_json", "no JSON conversation found in output for multi-turn task '" + task + "'");
    }
    std::vector<Turn> turns;
    turns.push_back({"user", question.empty() ? "Describe the slide." : question});
    turns.push_back({"assistant", strings::trim(raw)});
    return turns;
  }

  json value = json::parse(slice, nullptr, false);
  if (value.is_discarded()) {
    if (is_single_turn_task(task)) {
      // Brackets in prose, not a JSON payload; treat as bare text.
      std::vector<Turn> turns;
      turns.push_back({"user", question.empty() ? "Describe the slide." : question});
      turns.push_back({"assistant", strings::trim(raw)});
      return turns;
    }
    fail("no_json", "bracketed text in output for task '" + task + "' is not valid JSON");
  }

  std::vector<Turn> turns = turns_from_json(value);
  check_alternation(turns);
  return turns;
}

}  // namespace caseforge
