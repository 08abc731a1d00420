#include "caseforge/judge.hpp"

#include <mutex>

#include "caseforge/strings.hpp"

namespace caseforge {

using nlohmann::json;

JudgeVerdict parse_verdict(const std::string& raw) {
  const std::string slice = slice_outer_json(raw);
  if (slice.empty()) fail("verdict", "no JSON object found in judge response");
  json doc = json::parse(slice, nullptr, false);
  if (doc.is_discarded()) fail("verdict", "judge response JSON is malformed");
  if (!doc.is_object() || !doc.contains("evaluation_scores")) {
    fail("verdict", "judge response has no 'evaluation_scores' object");
  }

  JudgeVerdict verdict;
  verdict.raw = raw;
  verdict.reasoning = doc.value("step-by-step-reasoning", "");

  const json& scores = doc.at("evaluation_scores");
  auto read = [&](const char* key, int lo, int hi, std::string& justification) {
    if (!scores.contains(key)) {
      fail("verdict", std::string("judge response is missing '") + key + "'");
    }
    const json& entry = scores.at(key);
    if (!entry.is_object() || !entry.contains("score") ||
        !entry.at("score").is_number_integer()) {
      fail("verdict", std::string("'") + key + "' has no integer score");
    }
    const int value = entry.at("score").get<int>();
    if (value < lo || value > hi) {
      fail("range", std::string(key) + " score " + std::to_string(value) + " outside [" +
                        std::to_string(lo) + "," + std::to_string(hi) + "]");
    }
    justification = entry.value("justification", "");
    return value;
  };

  verdict.constraint_adherence =
      read("constraint_adherence", 0, 1, verdict.constraint_justification);
  verdict.groundedness =
      read("factual_groundedness_and_accuracy", 1, 5, verdict.groundedness_justification);
  verdict.clarity = read("reasoning_clarity", 1, 3, verdict.clarity_justification);
  return verdict;
}

namespace {

std::string conversation_text(const Conversation& conv) {
  json messages = json::array();
  for (const Turn& turn : conv.turns) {
    messages.push_back({{"role", turn.role}, {"content", turn.content}});
  }
  return messages.dump(2);
}

}  // namespace

JudgeVerdict judge_conversation(const Conversation& conv, const CaseRecord& source,
                                const WorkflowConfig& config, ChatClient& client,
                                const GenerateOptions& options) {
  if (conv.language != "en") {
    fail("judge", "only English conversations are judged; got '" + conv.language + "' for " +
                      conv.conv_id);
  }
  auto fields = record_fields(source);
  fields["generated_text"] = conversation_text(conv);

  // The rubric template embeds optional report fields (diff_diagnostic may
  // legitimately be absent), so blanks are substituted rather than fatal.
  RenderOptions render_options;
  render_options.allow_blank = true;

  ChatRequest request;
  request.model_id = options.model_id;
  request.messages.push_back(
      {"user", render(config.require_template(config.judge_template), fields, render_options)});
  request.temperature = config.judge_temperature;
  request.request_tag = "judge:" + conv.conv_id;

  return parse_verdict(client.complete(request).content);
}

JudgeOutcome judge_set(const WorkflowConfig& config, const ConversationSet& set,
                       const std::map<std::string, const CaseRecord*>& sources,
                       ChatClient& client, const GenerateOptions& options) {
  std::vector<const Conversation*> english;
  for (const Conversation& conv : set.conversations) {
    if (conv.language == "en") english.push_back(&conv);
  }

  JudgeOutcome outcome;
  std::mutex mutex;
  parallel_units(english.size(), config.concurrency, [&](size_t i) {
    const Conversation& conv = *english[i];
    auto source_it = sources.find(conv.case_id);
    if (source_it == sources.end()) {
      std::lock_guard lock(mutex);
      outcome.unjudged.push_back({conv.case_id, conv.task, conv.language,
                                  "judge:" + conv.conv_id, "missing source record", ""});
      return;
    }
    try {
      JudgeVerdict verdict = judge_conversation(conv, *source_it->second, config, client, options);
      std::lock_guard lock(mutex);
      outcome.verdicts.emplace(conv.conv_id, std::move(verdict));
    } catch (const Error& error) {
      std::lock_guard lock(mutex);
      outcome.unjudged.push_back({conv.case_id, conv.task, conv.language,
                                  "judge:" + conv.conv_id,
                                  error.code() + std::string(": ") + error.what(), ""});
    } catch (const std::exception& error) {
      std::lock_guard lock(mutex);
      outcome.unjudged.push_back({conv.case_id, conv.task, conv.language,
                                  "judge:" + conv.conv_id,
                                  std::string("internal: ") + error.what(), ""});
    }
  });
  return outcome;
}

json QualityFilterResult::report() const {
  std::map<std::string, size_t> histogram;
  for (const auto& [conv_id, reason] : discard_reasons) ++histogram[reason];
  json reasons = json::object();
  for (const auto& [reason, count] : histogram) reasons[reason] = count;
  return {{"kept", kept.size()},
          {"discarded", discarded.size()},
          {"keep_threshold", keep_threshold_used},
          {"discard_reasons", reasons}};
}

QualityFilterResult apply_quality_filter(const ConversationSet& set,
                                         const std::map<std::string, JudgeVerdict>& verdicts,
                                         const QualityThresholds& thresholds) {
  QualityFilterResult result;
  result.keep_threshold_used = thresholds.keep_threshold;

  // First pass decides English parents; second pass cascades to children.
  std::map<std::string, bool> parent_kept;
  std::map<std::string, std::string> parent_reason;
  for (const Conversation& conv : set.conversations) {
    if (conv.language != "en") continue;
    auto it = verdicts.find(conv.conv_id);
    if (it == verdicts.end()) {
      parent_kept[conv.conv_id] = !thresholds.discard_unjudged;
      parent_reason[conv.conv_id] = "unjudged";
      continue;
    }
    const JudgeVerdict& verdict = it->second;
    if (verdict.constraint_adherence != 1) {
      parent_kept[conv.conv_id] = false;
      parent_reason[conv.conv_id] = "constraint_violation";
    } else if (verdict.groundedness < thresholds.keep_threshold) {
      parent_kept[conv.conv_id] = false;
      parent_reason[conv.conv_id] = "groundedness_below_threshold";
    } else {
      parent_kept[conv.conv_id] = true;
    }
  }

  for (const Conversation& conv : set.conversations) {
    bool keep = false;
    std::string reason;
    if (conv.language == "en") {
      keep = parent_kept.at(conv.conv_id);
      if (!keep) reason = parent_reason.at(conv.conv_id);
    } else if (!conv.parent_id) {
      keep = false;
      reason = "translation_without_parent";
    } else {
      auto it = parent_kept.find(*conv.parent_id);
      if (it == parent_kept.end()) {
        keep = false;
        reason = "orphan_parent";
      } else {
        keep = it->second;
        if (!keep) reason = "parent_discarded";
      }
    }
    if (keep) {
      result.kept.conversations.push_back(conv);
    } else {
      result.discarded.conversations.push_back(conv);
      result.discard_reasons[conv.conv_id] = reason;
    }
  }

  result.kept.sort_canonical();
  result.discarded.sort_canonical();
  return result;
}

}  // namespace caseforge
