#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "caseforge/commands.hpp"
#include "caseforge/errors.hpp"
#include "caseforge/manifest.hpp"

namespace {

void add_common(CLI::App* cmd, caseforge::CommonOptions& options, std::uint64_t& seed,
                int& concurrency, bool& seed_set, bool& concurrency_set) {
  cmd->add_option("--workflow", options.workflow, "Workflow config file")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", options.out_dir, "Output directory")->required();
  cmd->add_option("--seed", seed, "Override the workflow seed")
      ->each([&seed_set](const std::string&) { seed_set = true; });
  cmd->add_option("--concurrency", concurrency, "Worker pool size")
      ->each([&concurrency_set](const std::string&) { concurrency_set = true; });
  cmd->add_option("--backend", options.backend, "Backend profile name from the workflow");
  cmd->add_flag("--resume", options.resume, "Skip units already present in the outputs");
  cmd->add_flag("--force", options.force, "Break a stale output-directory lock");
}

void apply_common(caseforge::CommonOptions& options, std::uint64_t seed, int concurrency,
                  bool seed_set, bool concurrency_set) {
  if (seed_set) options.seed = seed;
  if (concurrency_set) options.concurrency = concurrency;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"caseforge: clinical-case instruction dataset pipeline and VQA benchmark scorer"};
  app.set_version_flag("--version", std::string(caseforge::kToolVersion));
  app.require_subcommand(1);

  caseforge::CommonOptions common;
  std::uint64_t seed_value = 0;
  int concurrency_value = 0;
  bool seed_set = false;
  bool concurrency_set = false;

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Load case metadata and apply retention filters");
  std::string cases_path;
  std::string format_override;
  ingest->add_option("--cases", cases_path, "Case metadata file")
      ->required()
      ->check(CLI::ExistingFile);
  ingest->add_option("--format", format_override, "csv, json or jsonl (default: workflow)");
  add_common(ingest, common, seed_value, concurrency_value, seed_set, concurrency_set);

  // generate / translate / judge
  auto* generate = app.add_subcommand("generate", "Generate English conversations per case and task");
  add_common(generate, common, seed_value, concurrency_value, seed_set, concurrency_set);
  auto* translate = app.add_subcommand("translate", "Fan conversations out to the target languages");
  add_common(translate, common, seed_value, concurrency_value, seed_set, concurrency_set);
  auto* judge = app.add_subcommand("judge", "Score conversations with the rubric and filter");
  add_common(judge, common, seed_value, concurrency_value, seed_set, concurrency_set);

  // diversify
  auto* diversify = app.add_subcommand("diversify", "Paraphrase high-frequency user queries");
  caseforge::DiversifyOptions diversify_options;
  diversify->add_option("--plan", diversify_options.plan,
                        "Reuse a previously generated plan file");
  add_common(diversify, common, seed_value, concurrency_value, seed_set, concurrency_set);

  // eval
  auto* eval = app.add_subcommand("eval", "Score model responses and emit a metrics report");
  caseforge::EvalOptions eval_options;
  eval->add_option("--items", eval_options.items, "Eval items JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--responses", eval_options.responses,
                   "External responses JSONL {item_id, response}")
      ->check(CLI::ExistingFile);
  eval->add_option("--taxonomy", eval_options.taxonomy, "Taxonomy JSON (required for organ items)");
  eval->add_option("--out", eval_options.out_dir, "Output directory")->required();
  eval->add_option("--extractor", eval_options.extractor,
                   "'rules' or a workflow backend profile name");
  eval->add_option("--workflow", eval_options.workflow, "Workflow (for LLM extraction)");
  eval->add_option("--resamples", eval_options.resamples, "Bootstrap resamples");
  eval->add_option("--baseline-trials", eval_options.baseline_trials,
                   "Monte-Carlo trials for the chance row");
  eval->add_option("--seed", eval_options.seed, "Seed for bootstrap and baseline");
  eval->add_option("--label", eval_options.label, "Report label");
  eval->add_flag("--serial", eval_options.serial, "Disable the parallel statistics path");
  eval->add_flag("--force", eval_options.force, "Break a stale output-directory lock");

  // baseline
  auto* baseline = app.add_subcommand("baseline", "Monte-Carlo random-chance report");
  caseforge::BaselineOptions baseline_options;
  baseline->add_option("--items", baseline_options.items, "Eval items JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  baseline->add_option("--out", baseline_options.out_dir, "Output directory")->required();
  baseline->add_option("--trials", baseline_options.trials, "Monte-Carlo trials");
  baseline->add_option("--seed", baseline_options.seed, "Seed");
  baseline->add_flag("--serial", baseline_options.serial,
                     "Disable the parallel statistics path");
  baseline->add_flag("--force", baseline_options.force, "Break a stale output-directory lock");

  // report
  auto* report = app.add_subcommand("report", "Render metrics table and filtering ledger");
  caseforge::ReportOptions report_options;
  report->add_option("--out", report_options.out_dir, "Directory holding prior-stage artifacts")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    apply_common(common, seed_value, concurrency_value, seed_set, concurrency_set);
    if (ingest->parsed()) return caseforge::cmd_ingest(common, cases_path, format_override);
    if (generate->parsed()) return caseforge::cmd_generate(common);
    if (translate->parsed()) return caseforge::cmd_translate(common);
    if (judge->parsed()) return caseforge::cmd_judge(common);
    if (diversify->parsed()) return caseforge::cmd_diversify(common, diversify_options);
    if (eval->parsed()) return caseforge::cmd_eval(eval_options);
    if (baseline->parsed()) return caseforge::cmd_baseline(baseline_options);
    if (report->parsed()) return caseforge::cmd_report(report_options);
  } catch (const caseforge::Error& error) {
    std::cerr << nlohmann::json({{"code", error.code()}, {"error", error.what()}}).dump()
              << std::endl;
    return 1;
  } catch (const std::exception& error) {
    std::cerr << nlohmann::json({{"code", "internal"}, {"error", error.what()}}).dump()
              << std::endl;
    return 1;
  }
  return 0;
}
