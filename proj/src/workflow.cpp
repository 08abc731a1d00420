#include "caseforge/workflow.hpp"

#include <algorithm>

#include "caseforge/hash.hpp"
#include "caseforge/jsonl.hpp"
#include "caseforge/strings.hpp"

namespace caseforge {

using nlohmann::json;

const std::set<std::string>& known_task_names() {
  static const std::set<std::string> names = {
      "advanced_reasoning",     "clean_report",  "detailed_description",
      "differential_diagnosis", "multi_turn",    "negative_reasoning",
      "short_vqa"};
  return names;
}

const PromptTemplate& WorkflowConfig::require_template(const std::string& name) const {
  auto it = templates.find(name);
  if (it == templates.end()) {
    fail("dangling_template", "workflow references unknown template '" + name + "'");
  }
  return it->second;
}

const BackendProfile& WorkflowConfig::require_backend(const std::string& name) const {
  auto it = backends.find(name);
  if (it == backends.end()) {
    fail("config", "workflow defines no backend named '" + name + "'");
  }
  return it->second;
}

std::vector<TaskSpec> WorkflowConfig::enabled_tasks() const {
  std::vector<TaskSpec> enabled;
  for (const TaskSpec& task : tasks) {
    if (task.enabled) enabled.push_back(task);
  }
  return enabled;
}

namespace {

PromptTemplate load_template_entry(const std::string& name, const json& entry,
                                   const std::filesystem::path& base_dir) {
  std::string text;
  if (entry.is_string()) {
    text = entry.get<std::string>();
  } else if (entry.is_object() && entry.contains("text")) {
    text = entry.at("text").get<std::string>();
  } else if (entry.is_object() && entry.contains("file")) {
    text = jsonl::read_text_file(base_dir / entry.at("file").get<std::string>());
  } else {
    fail("config", "template '" + name + "' needs a 'text' or 'file' entry");
  }
  return parse_template(text, name);
}

BackendProfile backend_from_json(const std::string& name, const json& entry) {
  BackendProfile profile;
  profile.name = name;
  profile.kind = entry.value("kind", "mock");
  profile.url = entry.value("url", "");
  profile.model_id = entry.value("model", profile.kind == "mock" ? "mock-model" : "");
  profile.api_key_env = entry.value("api_key_env", "");
  profile.attempts = entry.value("attempts", 5);
  profile.base_delay_ms = entry.value("base_delay_ms", 1000L);
  profile.max_delay_ms = entry.value("max_delay_ms", 60000L);
  profile.timeout_ms = entry.value("timeout_ms", 60000L);
  profile.cassette = entry.value("cassette", "");

  static const std::set<std::string> kinds = {"mock", "http", "cassette_record",
                                              "cassette_replay"};
  if (!kinds.count(profile.kind)) {
    fail("config", "backend '" + name + "' has unknown kind '" + profile.kind + "'");
  }
  if (profile.kind == "http" && profile.url.empty()) {
    fail("config", "backend '" + name + "' is http but has no url");
  }
  if (profile.kind.rfind("cassette", 0) == 0 && profile.cassette.empty()) {
    fail("config", "backend '" + name + "' is a cassette kind but names no cassette file");
  }
  return profile;
}

}  // namespace

WorkflowConfig load_workflow(const std::filesystem::path& path) {
  const std::string text = jsonl::read_text_file(path);
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) fail("parse", path.string() + ": workflow file is not valid JSON");
  if (!doc.is_object()) fail("parse", path.string() + ": workflow must be a JSON object");

  WorkflowConfig config;
  config.source_path = path;
  config.content_hash = hex16(fnv1a64(text));
  const std::filesystem::path base_dir = path.parent_path();

  config.schema_version = doc.value("schema_version", 1);
  if (config.schema_version != 1) {
    fail("config", "unsupported workflow schema_version " +
                       std::to_string(config.schema_version));
  }
  if (!doc.contains("seed")) fail("config", path.string() + ": workflow must set a seed");
  config.seed = doc.at("seed").get<std::uint64_t>();
  config.concurrency = doc.value("concurrency", 4);
  config.allow_blank = doc.value("allow_blank", false);

  const json languages_json = doc.value("languages", json::array());
  for (const json& lang : languages_json) {
    config.languages.push_back(lang.get<std::string>());
  }
  {
    std::set<std::string> seen;
    for (const std::string& lang : config.languages) {
      if (lang == "en") fail("config", "'en' is the source language, not a translation target");
      if (!seen.insert(lang).second) fail("config", "duplicate language code '" + lang + "'");
    }
  }

  const json templates_json = doc.value("templates", json::object());
  for (const auto& item : templates_json.items()) {
    config.templates.emplace(item.key(), load_template_entry(item.key(), item.value(), base_dir));
  }

  const json tasks_json = doc.value("tasks", json::array());
  for (const json& entry : tasks_json) {
    TaskSpec task;
    task.name = entry.at("name").get<std::string>();
    task.template_name = entry.value("template", task.name);
    task.question = entry.value("question", "");
    task.enabled = entry.value("enabled", true);
    if (!known_task_names().count(task.name)) {
      fail("unknown_task", "unknown task name '" + task.name + "'");
    }
    config.tasks.push_back(std::move(task));
  }

  if (doc.contains("backends")) {
    for (const auto& item : doc.at("backends").items()) {
      config.backends.emplace(item.key(), backend_from_json(item.key(), item.value()));
    }
  }
  if (!config.backends.count("mock")) {
    BackendProfile mock;
    mock.name = "mock";
    config.backends.emplace("mock", mock);
  }
  config.default_backend = doc.value("default_backend", std::string("mock"));

  if (doc.contains("judge")) {
    const json& j = doc.at("judge");
    config.judge_template = j.value("template", config.judge_template);
    config.keep_threshold = j.value("keep_threshold", config.keep_threshold);
    config.unjudged_fate = j.value("unjudged", config.unjudged_fate);
    config.judge_temperature = j.value("temperature", config.judge_temperature);
  }
  if (doc.contains("translate")) {
    const json& t = doc.at("translate");
    config.translate_template = t.value("template", config.translate_template);
    config.translation_temperature = t.value("temperature", config.translation_temperature);
  }
  if (doc.contains("diversify")) {
    const json& d = doc.at("diversify");
    config.diversify_template = d.value("template", config.diversify_template);
    config.min_frequency = d.value("min_frequency", config.min_frequency);
    config.tiers = d.value("tiers", config.tiers);
    config.alternatives_count = d.value("alternatives", config.alternatives_count);
    if (d.contains("rates")) {
      config.tier_rates.clear();
      for (const json& rate : d.at("rates")) config.tier_rates.push_back(rate.get<double>());
    }
  }
  if (doc.contains("generation")) {
    config.generation_temperature =
        doc.at("generation").value("temperature", config.generation_temperature);
  }
  if (doc.contains("ingest")) {
    const json& i = doc.at("ingest");
    config.ingest_format = parse_source_format(i.value("format", "csv"));
    if (i.contains("field_map")) {
      for (const auto& item : i.at("field_map").items()) {
        config.field_map.canonical_to_source[item.key()] = item.value().get<std::string>();
      }
    }
    if (i.contains("stages")) {
      config.filter_stages.clear();
      for (const json& stage : i.at("stages")) {
        config.filter_stages.push_back(stage.get<std::string>());
      }
    }
  }

  // Every reference must resolve now, not at stage run time.
  for (const TaskSpec& task : config.tasks) config.require_template(task.template_name);
  if (!config.languages.empty()) config.require_template(config.translate_template);
  if (doc.contains("judge")) config.require_template(config.judge_template);
  if (doc.contains("diversify")) config.require_template(config.diversify_template);
  config.require_backend(config.default_backend);

  if (config.unjudged_fate != "discard" && config.unjudged_fate != "keep") {
    fail("config", "judge.unjudged must be 'discard' or 'keep'");
  }
  if (config.tier_rates.size() != static_cast<size_t>(config.tiers)) {
    fail("config", "diversify.rates must list one rate per tier");
  }
  if (!std::is_sorted(config.tier_rates.begin(), config.tier_rates.end())) {
    fail("config", "diversify.rates must be non-decreasing with tier");
  }

  return config;
}

std::shared_ptr<ChatBackend> make_backend(const WorkflowConfig& config,
                                          const BackendProfile& profile) {
  const std::filesystem::path base_dir = config.source_path.parent_path();
  if (profile.kind == "mock") {
    return std::make_shared<MockBackend>();
  }
  if (profile.kind == "http") {
    return std::make_shared<HttpBackend>(profile.url, profile.api_key_env, profile.timeout_ms);
  }
  std::filesystem::path store = profile.cassette;
  if (store.is_relative()) store = base_dir / store;
  if (profile.kind == "cassette_replay") {
    return std::make_shared<CassetteBackend>(store, CassetteMode::kReplay);
  }
  std::shared_ptr<ChatBackend> inner;
  if (!profile.url.empty()) {
    inner = std::make_shared<HttpBackend>(profile.url, profile.api_key_env, profile.timeout_ms);
  } else {
    inner = std::make_shared<MockBackend>();
  }
  return std::make_shared<CassetteBackend>(store, CassetteMode::kRecord, std::move(inner));
}

}  // namespace caseforge
