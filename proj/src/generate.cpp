#include "caseforge/generate.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>

#include "caseforge/strings.hpp"

namespace caseforge {

using nlohmann::json;

json QuarantineRecord::to_json() const {
  return {{"case_id", case_id}, {"task", task},     {"language", language},
          {"request_tag", request_tag}, {"reason", reason}, {"raw", raw}};
}

std::string make_conv_id(const std::string& case_id, const std::string& task,
                         const std::string& language) {
  return case_id + ":" + task + ":" + language;
}

void parallel_units(size_t count, int workers, const std::function<void(size_t)>& fn) {
  if (count == 0) return;
  const size_t n_threads = std::min<size_t>(std::max(workers, 1), count);
  if (n_threads <= 1) {
    for (size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (size_t t = 0; t < n_threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& thread : pool) thread.join();
  if (first_error) std::rethrow_exception(first_error);
}

namespace {

void sort_quarantine(std::vector<QuarantineRecord>& records) {
  std::sort(records.begin(), records.end(),
            [](const QuarantineRecord& a, const QuarantineRecord& b) {
              return std::tie(a.case_id, a.task, a.language, a.request_tag) <
                     std::tie(b.case_id, b.task, b.language, b.request_tag);
            });
}

}  // namespace

GenerationResult run_generation(const WorkflowConfig& config, const CaseRecordSet& cases,
                                ChatClient& client, const GenerateOptions& options) {
  // (case_id, task) lexicographic order fixes the unit list and the output.
  std::vector<std::pair<const CaseRecord*, TaskSpec>> units;
  {
    std::vector<const CaseRecord*> sorted_cases;
    sorted_cases.reserve(cases.size());
    for (const CaseRecord& record : cases.records) sorted_cases.push_back(&record);
    std::sort(sorted_cases.begin(), sorted_cases.end(),
              [](const CaseRecord* a, const CaseRecord* b) { return a->case_id < b->case_id; });
    std::vector<TaskSpec> tasks = config.enabled_tasks();
    std::sort(tasks.begin(), tasks.end(),
              [](const TaskSpec& a, const TaskSpec& b) { return a.name < b.name; });
    for (const CaseRecord* record : sorted_cases) {
      for (const TaskSpec& task : tasks) {
        if (options.already_done.count({record->case_id, task.name})) continue;
        units.emplace_back(record, task);
      }
    }
  }

  GenerationResult result;
  result.conversations.conversations.resize(units.size());
  std::vector<char> produced(units.size(), 0);
  std::mutex quarantine_mutex;

  parallel_units(units.size(), config.concurrency, [&](size_t i) {
    const CaseRecord& record = *units[i].first;
    const TaskSpec& task = units[i].second;
    const std::string tag = "gen:" + record.case_id + ":" + task.name;
    std::string raw;
    try {
      RenderOptions render_options;
      render_options.allow_blank = config.allow_blank;
      const std::string prompt =
          render(config.require_template(task.template_name), record, render_options);

      ChatRequest request;
      request.model_id = options.model_id;
      request.messages.push_back({"user", prompt});
      request.temperature = config.generation_temperature;
      request.request_tag = tag;
      raw = client.complete(request).content;

      Conversation conv;
      conv.conv_id = make_conv_id(record.case_id, task.name, "en");
      conv.case_id = record.case_id;
      conv.task = task.name;
      conv.language = "en";
      conv.turns = parse_conversation(raw, task.name, task.question);
      conv.provenance = {options.model_id, task.template_name, options.timestamp, tag};
      result.conversations.conversations[i] = std::move(conv);
      produced[i] = 1;
    } catch (const Error& error) {
      std::lock_guard lock(quarantine_mutex);
      result.quarantined.push_back({record.case_id, task.name, "en", tag,
                                    error.code() + std::string(": ") + error.what(), raw});
    } catch (const std::exception& error) {
      std::lock_guard lock(quarantine_mutex);
      result.quarantined.push_back({record.case_id, task.name, "en", tag,
                                    std::string("internal: ") + error.what(), raw});
    }
  });

  // Compact out quarantined slots, keeping unit order.
  ConversationSet compacted;
  compacted.conversations.reserve(units.size());
  for (size_t i = 0; i < units.size(); ++i) {
    if (produced[i]) compacted.conversations.push_back(std::move(result.conversations.conversations[i]));
  }
  result.conversations = std::move(compacted);
  result.conversations.sort_canonical();
  sort_quarantine(result.quarantined);
  return result;
}

GenerationResult translate_set(const WorkflowConfig& config, const ConversationSet& english,
                               const std::vector<std::string>& languages, ChatClient& client,
                               const GenerateOptions& options) {
  for (const Conversation& conv : english.conversations) {
    if (conv.language != "en") {
      fail("translate", "translation input must be English; got '" + conv.language +
                            "' for " + conv.conv_id);
    }
  }

  GenerationResult result;
  result.conversations = english;
  if (languages.empty() || english.empty()) {
    result.conversations.sort_canonical();
    return result;
  }

  const PromptTemplate& tmpl = config.require_template(config.translate_template);
  std::vector<std::pair<const Conversation*, std::string>> units;
  for (const Conversation& conv : english.conversations) {
    for (const std::string& lang : languages) {
      if (options.already_done.count({conv.conv_id, lang})) continue;
      units.emplace_back(&conv, lang);
    }
  }

  std::vector<Conversation> variants(units.size());
  std::vector<char> produced(units.size(), 0);
  std::mutex quarantine_mutex;

  parallel_units(units.size(), config.concurrency, [&](size_t i) {
    const Conversation& parent = *units[i].first;
    const std::string& lang = units[i].second;
    const std::string unit_tag = "tr:" + parent.conv_id + ":" + lang;
    try {
      Conversation variant;
      variant.conv_id = make_conv_id(parent.case_id, parent.task, lang);
      variant.case_id = parent.case_id;
      variant.task = parent.task;
      variant.language = lang;
      variant.parent_id = parent.conv_id;
      variant.provenance = {options.model_id, config.translate_template, options.timestamp,
                            unit_tag};

      for (size_t t = 0; t < parent.turns.size(); ++t) {
        std::map<std::string, std::string> fields = {{"language", lang},
                                                     {"role", parent.turns[t].role},
                                                     {"text", parent.turns[t].content}};
        ChatRequest request;
        request.model_id = options.model_id;
        request.messages.push_back({"user", render(tmpl, fields)});
        request.temperature = config.translation_temperature;
        request.request_tag = unit_tag + ":" + std::to_string(t);
        variant.turns.push_back({parent.turns[t].role,
                                 strings::trim(client.complete(request).content)});
      }
      variants[i] = std::move(variant);
      produced[i] = 1;
    } catch (const Error& error) {
      std::lock_guard lock(quarantine_mutex);
      result.quarantined.push_back({parent.case_id, parent.task, lang, unit_tag,
                                    error.code() + std::string(": ") + error.what(), ""});
    } catch (const std::exception& error) {
      std::lock_guard lock(quarantine_mutex);
      result.quarantined.push_back({parent.case_id, parent.task, lang, unit_tag,
                                    std::string("internal: ") + error.what(), ""});
    }
  });

  for (size_t i = 0; i < units.size(); ++i) {
    if (produced[i]) result.conversations.conversations.push_back(std::move(variants[i]));
  }
  result.conversations.sort_canonical();
  sort_quarantine(result.quarantined);
  return result;
}

}  // namespace caseforge
