#include "caseforge/commands.hpp"

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "caseforge/diversify.hpp"
#include "caseforge/generate.hpp"
#include "caseforge/judge.hpp"
#include "caseforge/jsonl.hpp"
#include "caseforge/manifest.hpp"
#include "caseforge/metrics.hpp"
#include "caseforge/rng.hpp"
#include "caseforge/strings.hpp"

namespace caseforge {

using nlohmann::json;

namespace {

constexpr const char* kLockName = ".caseforge.lock";
constexpr const char* kEpochTimestamp = "1970-01-01T00:00:00Z";

struct StageTimer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  long elapsed_ms() const {
    return static_cast<long>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                 std::chrono::steady_clock::now() - start)
                                 .count());
  }
};

WorkflowConfig load_workflow_with_overrides(const CommonOptions& options) {
  WorkflowConfig config = load_workflow(options.workflow);
  if (options.seed) config.seed = *options.seed;
  if (options.concurrency) config.concurrency = *options.concurrency;
  return config;
}

struct StageContext {
  WorkflowConfig config;
  BackendProfile profile;
  std::shared_ptr<RequestLimiter> limiter;
  std::shared_ptr<ChatClient> client;
  std::string timestamp;
};

StageContext make_context(const CommonOptions& options) {
  StageContext ctx{load_workflow_with_overrides(options), {}, nullptr, nullptr, ""};
  const std::string profile_name =
      options.backend.empty() ? ctx.config.default_backend : options.backend;
  ctx.profile = ctx.config.require_backend(profile_name);
  auto backend = make_backend(ctx.config, ctx.profile);
  ctx.limiter = std::make_shared<RequestLimiter>(ctx.config.concurrency);
  RetryPolicy retry{ctx.profile.attempts, ctx.profile.base_delay_ms, ctx.profile.max_delay_ms};
  ctx.client = std::make_shared<ChatClient>(backend, retry, ctx.limiter);
  // Deterministic backends pin the provenance timestamp so reruns are
  // byte-identical; live backends record real time.
  ctx.timestamp = ctx.client->deterministic() ? kEpochTimestamp : now_iso8601();
  return ctx;
}

RunManifest start_manifest(const std::string& command, const WorkflowConfig& config,
                           const std::string& backend_name) {
  RunManifest manifest;
  manifest.command = command;
  manifest.workflow_path = config.source_path.string();
  manifest.workflow_hash = config.content_hash;
  manifest.seed = config.seed;
  manifest.backend = backend_name;
  manifest.started_at = now_iso8601();
  return manifest;
}

ConversationSet read_conversations(const std::filesystem::path& path) {
  ConversationSet set;
  for (const json& row : jsonl::read_file(path)) {
    set.conversations.push_back(conversation_from_json(row));
  }
  return set;
}

void write_conversations(const std::filesystem::path& path, const ConversationSet& set) {
  std::vector<json> rows;
  rows.reserve(set.size());
  for (const Conversation& conv : set.conversations) rows.push_back(conv.to_json());
  jsonl::write_file(path, rows);
}

void write_quarantine(const std::filesystem::path& path,
                      const std::vector<QuarantineRecord>& records) {
  std::vector<json> rows;
  rows.reserve(records.size());
  for (const QuarantineRecord& record : records) rows.push_back(record.to_json());
  jsonl::write_file(path, rows);
}

CaseRecordSet read_retained(const std::filesystem::path& out_dir) {
  CaseRecordSet set;
  const auto path = out_dir / "retained.jsonl";
  jsonl::for_each_line(path, [&](const json& row, size_t line_no) {
    set.records.push_back(
        record_from_json(row, path.string() + ":line " + std::to_string(line_no)));
  });
  return set;
}

std::string ledger_text(const FilterLedger& ledger) {
  std::ostringstream out;
  out << "Filtering ledger (input " << ledger.input_total << ")\n";
  for (const LedgerStage& stage : ledger.stages) {
    out << "  " << std::left << std::setw(22) << stage.stage << std::right << std::setw(8)
        << stage.input << " -> " << std::setw(8) << stage.retained << "  (discarded "
        << stage.discarded;
    if (stage.discarded > 0) out << ", " << stage.discard_reason;
    out << ")\n";
  }
  out << "  final retained: " << ledger.final_retained() << "\n";
  return out.str();
}

std::vector<EvalItem> load_eval_items(const std::filesystem::path& items_path,
                                      const std::filesystem::path& responses_path) {
  std::vector<EvalItem> items;
  jsonl::for_each_line(items_path, [&](const json& row, size_t line_no) {
    items.push_back(
        EvalItem::from_json(row, items_path.string() + ":line " + std::to_string(line_no)));
  });
  if (!responses_path.empty()) {
    std::map<std::string, std::string> responses;
    jsonl::for_each_line(responses_path, [&](const json& row, size_t line_no) {
      if (!row.contains("item_id") || !row.contains("response")) {
        fail("parse", responses_path.string() + ":line " + std::to_string(line_no) +
                          ": expected {item_id, response}");
      }
      responses[row.at("item_id").get<std::string>()] = row.at("response").get<std::string>();
    });
    std::set<std::string> known;
    for (EvalItem& item : items) {
      known.insert(item.item_id);
      auto it = responses.find(item.item_id);
      if (it != responses.end()) item.model_response = it->second;
    }
    for (const auto& [item_id, response] : responses) {
      if (!known.count(item_id)) {
        fail("parse", "response for unknown item_id '" + item_id + "'");
      }
    }
  }
  return items;
}

}  // namespace

OutDirLock::OutDirLock(const std::filesystem::path& out_dir, bool force)
    : lock_path_(out_dir / kLockName) {
  std::filesystem::create_directories(out_dir);
  if (std::filesystem::exists(lock_path_)) {
    if (!force) {
      fail("lock", out_dir.string() +
                       " is locked by another run (use --force to break a stale lock)");
    }
    std::filesystem::remove(lock_path_);
  }
  jsonl::write_text_file(lock_path_, now_iso8601() + "\n");
}

OutDirLock::~OutDirLock() {
  std::error_code ec;
  std::filesystem::remove(lock_path_, ec);
}

// ---------------------------------------------------------------------------

int cmd_ingest(const CommonOptions& options, const std::filesystem::path& cases_path,
               const std::string& format_override) {
  StageTimer timer;
  OutDirLock lock(options.out_dir, options.force);
  WorkflowConfig config = load_workflow_with_overrides(options);

  const SourceFormat format = format_override.empty() ? config.ingest_format
                                                      : parse_source_format(format_override);
  CaseRecordSet cases = load_cases(cases_path, format, config.field_map);
  auto [retained, ledger] = filter_cases(cases, FilterPolicy{config.filter_stages});

  std::vector<json> rows;
  rows.reserve(retained.size());
  std::sort(retained.records.begin(), retained.records.end(),
            [](const CaseRecord& a, const CaseRecord& b) { return a.case_id < b.case_id; });
  for (const CaseRecord& record : retained.records) rows.push_back(record_to_json(record));
  jsonl::write_file(options.out_dir / "retained.jsonl", rows);
  jsonl::write_json_file(options.out_dir / "ledger.json", ledger.to_json());

  RunManifest manifest = start_manifest("ingest", config, "");
  manifest.inputs = {cases_path.string(), options.workflow.string()};
  manifest.outputs = {"retained.jsonl", "ledger.json"};
  manifest.counts["input"] = static_cast<std::int64_t>(ledger.input_total);
  manifest.counts["retained"] = static_cast<std::int64_t>(ledger.final_retained());
  manifest.counts["discarded"] = static_cast<std::int64_t>(ledger.total_discarded());
  manifest.wall_ms = timer.elapsed_ms();
  manifest.write(options.out_dir);

  std::cout << ledger_text(ledger);
  return 0;
}

int cmd_generate(const CommonOptions& options) {
  StageTimer timer;
  OutDirLock lock(options.out_dir, options.force);
  require_stage(options.out_dir, "ingest", "generate");
  StageContext ctx = make_context(options);

  CaseRecordSet cases = read_retained(options.out_dir);

  GenerateOptions gen_options;
  gen_options.model_id = ctx.profile.model_id;
  gen_options.timestamp = ctx.timestamp;

  ConversationSet existing;
  const auto conversations_path = options.out_dir / "conversations.jsonl";
  if (options.resume && std::filesystem::exists(conversations_path)) {
    existing = read_conversations(conversations_path);
    for (const Conversation& conv : existing.conversations) {
      gen_options.already_done.insert({conv.case_id, conv.task});
    }
  }

  GenerationResult result = run_generation(ctx.config, cases, *ctx.client, gen_options);
  const size_t fresh = result.conversations.size();
  for (Conversation& conv : existing.conversations) {
    result.conversations.conversations.push_back(std::move(conv));
  }
  result.conversations.sort_canonical();

  write_conversations(conversations_path, result.conversations);
  write_quarantine(options.out_dir / "quarantine.generate.jsonl", result.quarantined);

  RunManifest manifest = start_manifest("generate", ctx.config, ctx.profile.name);
  manifest.inputs = {"retained.jsonl"};
  manifest.outputs = {"conversations.jsonl", "quarantine.generate.jsonl"};
  manifest.counts["cases"] = static_cast<std::int64_t>(cases.size());
  manifest.counts["tasks"] = static_cast<std::int64_t>(ctx.config.enabled_tasks().size());
  manifest.counts["conversations"] = static_cast<std::int64_t>(result.conversations.size());
  manifest.counts["generated"] = static_cast<std::int64_t>(fresh);
  manifest.counts["skipped"] = static_cast<std::int64_t>(gen_options.already_done.size());
  manifest.counts["quarantined"] = static_cast<std::int64_t>(result.quarantined.size());
  manifest.wall_ms = timer.elapsed_ms();
  manifest.write(options.out_dir);

  std::cout << "generate: " << result.conversations.size() << " conversations ("
            << result.quarantined.size() << " quarantined, "
            << gen_options.already_done.size() << " skipped)\n";
  return 0;
}

int cmd_translate(const CommonOptions& options) {
  StageTimer timer;
  OutDirLock lock(options.out_dir, options.force);
  require_stage(options.out_dir, "generate", "translate");
  StageContext ctx = make_context(options);

  ConversationSet english = read_conversations(options.out_dir / "conversations.jsonl");

  GenerateOptions gen_options;
  gen_options.model_id = ctx.profile.model_id;
  gen_options.timestamp = ctx.timestamp;

  ConversationSet existing;
  const auto translations_path = options.out_dir / "translations.jsonl";
  if (options.resume && std::filesystem::exists(translations_path)) {
    existing = read_conversations(translations_path);
    for (const Conversation& conv : existing.conversations) {
      if (conv.parent_id) gen_options.already_done.insert({*conv.parent_id, conv.language});
    }
  }

  GenerationResult result =
      translate_set(ctx.config, english, ctx.config.languages, *ctx.client, gen_options);

  ConversationSet translations = std::move(existing);
  for (Conversation& conv : result.conversations.conversations) {
    if (conv.language != "en") translations.conversations.push_back(std::move(conv));
  }
  translations.sort_canonical();

  write_conversations(translations_path, translations);
  write_quarantine(options.out_dir / "quarantine.translate.jsonl", result.quarantined);

  RunManifest manifest = start_manifest("translate", ctx.config, ctx.profile.name);
  manifest.inputs = {"conversations.jsonl"};
  manifest.outputs = {"translations.jsonl", "quarantine.translate.jsonl"};
  manifest.counts["english"] = static_cast<std::int64_t>(english.size());
  manifest.counts["languages"] = static_cast<std::int64_t>(ctx.config.languages.size());
  manifest.counts["translations"] = static_cast<std::int64_t>(translations.size());
  manifest.counts["quarantined"] = static_cast<std::int64_t>(result.quarantined.size());
  manifest.wall_ms = timer.elapsed_ms();
  manifest.write(options.out_dir);

  std::cout << "translate: " << translations.size() << " translated variants ("
            << result.quarantined.size() << " quarantined)\n";
  return 0;
}

int cmd_judge(const CommonOptions& options) {
  StageTimer timer;
  OutDirLock lock(options.out_dir, options.force);
  require_stage(options.out_dir, "generate", "judge");
  StageContext ctx = make_context(options);

  ConversationSet set = read_conversations(options.out_dir / "conversations.jsonl");
  const auto translations_path = options.out_dir / "translations.jsonl";
  if (std::filesystem::exists(translations_path)) {
    ConversationSet translations = read_conversations(translations_path);
    for (Conversation& conv : translations.conversations) {
      set.conversations.push_back(std::move(conv));
    }
  }
  set.sort_canonical();

  CaseRecordSet retained = read_retained(options.out_dir);
  std::map<std::string, const CaseRecord*> sources;
  for (const CaseRecord& record : retained.records) sources.emplace(record.case_id, &record);

  GenerateOptions gen_options;
  gen_options.model_id = ctx.profile.model_id;
  gen_options.timestamp = ctx.timestamp;
  JudgeOutcome outcome = judge_set(ctx.config, set, sources, *ctx.client, gen_options);

  std::vector<json> verdict_rows;
  for (const auto& [conv_id, verdict] : outcome.verdicts) {
    json row = verdict.to_json();
    row["conv_id"] = conv_id;
    verdict_rows.push_back(std::move(row));
  }
  jsonl::write_file(options.out_dir / "verdicts.jsonl", verdict_rows);

  QualityThresholds thresholds;
  thresholds.keep_threshold = ctx.config.keep_threshold;
  thresholds.discard_unjudged = ctx.config.unjudged_fate == "discard";
  QualityFilterResult filtered = apply_quality_filter(set, outcome.verdicts, thresholds);

  write_conversations(options.out_dir / "kept.jsonl", filtered.kept);
  write_conversations(options.out_dir / "discarded.jsonl", filtered.discarded);
  jsonl::write_json_file(options.out_dir / "filter_report.json", filtered.report());
  write_quarantine(options.out_dir / "quarantine.judge.jsonl", outcome.unjudged);

  RunManifest manifest = start_manifest("judge", ctx.config, ctx.profile.name);
  manifest.inputs = {"conversations.jsonl", "translations.jsonl", "retained.jsonl"};
  manifest.outputs = {"verdicts.jsonl", "kept.jsonl", "discarded.jsonl", "filter_report.json",
                      "quarantine.judge.jsonl"};
  manifest.counts["input"] = static_cast<std::int64_t>(set.size());
  manifest.counts["judged"] = static_cast<std::int64_t>(outcome.verdicts.size());
  manifest.counts["unjudged"] = static_cast<std::int64_t>(outcome.unjudged.size());
  manifest.counts["kept"] = static_cast<std::int64_t>(filtered.kept.size());
  manifest.counts["discarded"] = static_cast<std::int64_t>(filtered.discarded.size());
  manifest.wall_ms = timer.elapsed_ms();
  manifest.write(options.out_dir);

  std::cout << "judge: kept " << filtered.kept.size() << " / " << set.size() << " (threshold "
            << thresholds.keep_threshold << ", " << outcome.unjudged.size() << " unjudged)\n";
  return 0;
}

int cmd_diversify(const CommonOptions& options, const DiversifyOptions& diversify) {
  StageTimer timer;
  OutDirLock lock(options.out_dir, options.force);
  require_stage(options.out_dir, "judge", "diversify");
  StageContext ctx = make_context(options);

  ConversationSet set = read_conversations(options.out_dir / "kept.jsonl");

  DiversificationPlan plan;
  std::vector<std::pair<std::string, std::string>> skipped;
  if (!diversify.plan.empty()) {
    plan = DiversificationPlan::from_json(jsonl::read_json_file(diversify.plan));
  } else {
    QueryHistogram histogram = count_user_queries(set);
    plan = build_plan(histogram, ctx.config.min_frequency, ctx.config.tier_rates,
                      ctx.config.seed);
    GenerateOptions gen_options;
    gen_options.model_id = ctx.profile.model_id;
    gen_options.timestamp = ctx.timestamp;
    skipped = generate_alternatives(plan, ctx.config, *ctx.client, gen_options);
  }
  jsonl::write_json_file(options.out_dir / "plan.json", plan.to_json());

  auto [diversified, report] = apply_diversification(set, plan);
  write_conversations(options.out_dir / "diversified.jsonl", diversified);

  json report_json = report.to_json();
  json skipped_json = json::array();
  for (const auto& [query, reason] : skipped) {
    skipped_json.push_back({{"query", query}, {"reason", reason}});
  }
  report_json["skipped_queries"] = skipped_json;
  jsonl::write_json_file(options.out_dir / "diversify_report.json", report_json);

  RunManifest manifest = start_manifest("diversify", ctx.config, ctx.profile.name);
  manifest.inputs = {"kept.jsonl"};
  manifest.outputs = {"plan.json", "diversified.jsonl", "diversify_report.json"};
  manifest.counts["conversations"] = static_cast<std::int64_t>(set.size());
  manifest.counts["planned_queries"] = static_cast<std::int64_t>(plan.queries.size());
  manifest.counts["replaced"] = static_cast<std::int64_t>(report.replaced_messages);
  manifest.counts["skipped_queries"] = static_cast<std::int64_t>(skipped.size());
  manifest.wall_ms = timer.elapsed_ms();
  manifest.write(options.out_dir);

  std::cout << "diversify: " << plan.queries.size() << " planned queries, replaced "
            << report.replaced_messages << " of " << report.eligible_messages
            << " eligible user messages\n";
  if (plan.queries.empty()) {
    std::cout << "warning: no query reached min_frequency " << ctx.config.min_frequency
              << "; plan is empty\n";
  }
  return 0;
}

int cmd_eval(const EvalOptions& options) {
  StageTimer timer;
  OutDirLock lock(options.out_dir, options.force);
  std::vector<EvalItem> items = load_eval_items(options.items, options.responses);

  std::optional<Taxonomy> taxonomy;
  bool needs_taxonomy = false;
  for (const EvalItem& item : items) needs_taxonomy |= item.kind == ItemKind::kOrgan;
  if (needs_taxonomy) {
    if (options.taxonomy.empty()) fail("config", "organ items present; --taxonomy is required");
    taxonomy = Taxonomy::load(options.taxonomy);
  }

  std::shared_ptr<ChatClient> llm;
  std::string model_id = "mock-model";
  int concurrency = 4;
  WorkflowConfig config;
  if (options.extractor != "rules") {
    if (options.workflow.empty()) {
      fail("config", "--extractor '" + options.extractor + "' needs --workflow");
    }
    config = load_workflow(options.workflow);
    const BackendProfile& profile = config.require_backend(options.extractor);
    RetryPolicy retry{profile.attempts, profile.base_delay_ms, profile.max_delay_ms};
    llm = std::make_shared<ChatClient>(make_backend(config, profile), retry,
                                       std::make_shared<RequestLimiter>(config.concurrency));
    model_id = profile.model_id;
    concurrency = config.concurrency;
  }

  std::vector<ScoredItem> scored(items.size());
  parallel_units(items.size(), llm ? concurrency : 1, [&](size_t i) {
    scored[i] = score_item(items[i], taxonomy ? &*taxonomy : nullptr, llm.get(), model_id);
  });

  CiConfig ci;
  ci.resamples = options.resamples;
  ci.seed = options.seed;
  ci.parallel = !options.serial;
  MetricsReport report = compute_metrics(scored, ci, options.label);

  MetricsReport chance = random_baseline(items, derive_seed(options.seed, {"baseline"}),
                                         options.baseline_trials, !options.serial);

  jsonl::write_json_file(options.out_dir / ("metrics." + options.label + ".json"),
                         report.to_json());

  RunManifest manifest;
  manifest.command = "eval";
  manifest.seed = options.seed;
  manifest.inputs = {options.items.string()};
  if (!options.responses.empty()) manifest.inputs.push_back(options.responses.string());
  if (!options.taxonomy.empty()) manifest.inputs.push_back(options.taxonomy.string());
  manifest.outputs = {"metrics." + options.label + ".json"};
  manifest.counts["items"] = static_cast<std::int64_t>(items.size());
  manifest.counts["unparsed"] = static_cast<std::int64_t>(report.unparsed_count);
  manifest.started_at = now_iso8601();
  manifest.wall_ms = timer.elapsed_ms();
  manifest.write(options.out_dir);

  std::cout << render_metrics_table({chance, report});
  return 0;
}

int cmd_baseline(const BaselineOptions& options) {
  StageTimer timer;
  OutDirLock lock(options.out_dir, options.force);
  std::vector<EvalItem> items = load_eval_items(options.items, {});

  MetricsReport report = random_baseline(items, options.seed, options.trials, !options.serial);
  jsonl::write_json_file(options.out_dir / "metrics.random_chance.json", report.to_json());

  RunManifest manifest;
  manifest.command = "baseline";
  manifest.seed = options.seed;
  manifest.inputs = {options.items.string()};
  manifest.outputs = {"metrics.random_chance.json"};
  manifest.counts["items"] = static_cast<std::int64_t>(items.size());
  manifest.counts["trials"] = options.trials;
  manifest.started_at = now_iso8601();
  manifest.wall_ms = timer.elapsed_ms();
  manifest.write(options.out_dir);

  std::cout << render_metrics_table({report});
  return 0;
}

int cmd_report(const ReportOptions& options) {
  StageTimer timer;
  std::vector<std::filesystem::path> metric_files;
  if (std::filesystem::exists(options.out_dir)) {
    for (const auto& entry : std::filesystem::directory_iterator(options.out_dir)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("metrics.", 0) == 0 && name.size() > 13 &&
          name.substr(name.size() - 5) == ".json") {
        metric_files.push_back(entry.path());
      }
    }
  }
  std::sort(metric_files.begin(), metric_files.end());

  std::vector<MetricsReport> reports;
  for (const auto& path : metric_files) {
    reports.push_back(MetricsReport::from_json(jsonl::read_json_file(path)));
  }
  // Chance row first, mirroring the benchmark table.
  std::stable_partition(reports.begin(), reports.end(),
                        [](const MetricsReport& r) { return r.label == "random_chance"; });

  const auto ledger_path = options.out_dir / "ledger.json";
  const bool has_ledger = std::filesystem::exists(ledger_path);
  if (reports.empty() && !has_ledger) {
    fail("stage_order", "nothing to report in " + options.out_dir.string() +
                            "; run eval/baseline/ingest first");
  }

  std::ostringstream text;
  if (!reports.empty()) text << render_metrics_table(reports);
  if (has_ledger) {
    const json doc = jsonl::read_json_file(ledger_path);
    FilterLedger ledger;
    ledger.input_total = doc.value("input_total", size_t{0});
    const json stages_json = doc.value("stages", json::array());
    for (const json& stage : stages_json) {
      ledger.stages.push_back({stage.at("stage").get<std::string>(),
                               stage.at("input").get<size_t>(),
                               stage.at("retained").get<size_t>(),
                               stage.at("discarded").get<size_t>(),
                               stage.value("discard_reason", "")});
    }
    if (!reports.empty()) text << "\n";
    text << ledger_text(ledger);
  }

  jsonl::write_text_file(options.out_dir / "report.txt", text.str());

  RunManifest manifest;
  manifest.command = "report";
  manifest.outputs = {"report.txt"};
  manifest.counts["metric_files"] = static_cast<std::int64_t>(metric_files.size());
  manifest.started_at = now_iso8601();
  manifest.wall_ms = timer.elapsed_ms();
  manifest.write(options.out_dir);

  std::cout << text.str();
  return 0;
}

}  // namespace caseforge
