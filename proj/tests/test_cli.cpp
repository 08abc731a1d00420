#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "caseforge/jsonl.hpp"

#include "test_support.hpp"

using nlohmann::json;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string stdout_text;
  std::string stderr_text;
};

CliResult run_cli(const std::string& args, const std::filesystem::path& scratch) {
  const auto bin = testsup::caseforge_bin();
  REQUIRE_MESSAGE(!bin.empty(), "CASEFORGE_BIN must point at the built binary");
  const auto out_file = scratch / "stdout.txt";
  const auto err_file = scratch / "stderr.txt";
  const std::string command = bin.string() + " " + args + " >" + out_file.string() + " 2>" +
                              err_file.string();
  const int status = std::system(command.c_str());
  CliResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.stdout_text = caseforge::jsonl::read_text_file(out_file);
  result.stderr_text = caseforge::jsonl::read_text_file(err_file);
  return result;
}

std::string workflow_arg() {
  return "--workflow " + (testsup::fixtures_dir() / "workflow.json").string();
}

}  // namespace

TEST_CASE("generate before ingest is a stage-order error") {
  testsup::TempDir dir;
  const auto out = dir.path() / "out";
  const CliResult result = run_cli("generate " + workflow_arg() + " --out " + out.string(),
                                   dir.path());
  CHECK(result.exit_code == 1);
  const json error = json::parse(result.stderr_text);
  CHECK(error.at("code") == "stage_order");
  CHECK(error.at("error").get<std::string>().find("ingest") != std::string::npos);
}

TEST_CASE("diversify requires judge artifacts") {
  testsup::TempDir dir;
  const auto out = dir.path() / "out";
  const CliResult result = run_cli("diversify " + workflow_arg() + " --out " + out.string(),
                                   dir.path());
  CHECK(result.exit_code == 1);
  CHECK(json::parse(result.stderr_text).at("code") == "stage_order");
}

TEST_CASE("a held lock blocks a second run unless forced") {
  testsup::TempDir dir;
  const auto out = dir.path() / "out";
  std::filesystem::create_directories(out);
  std::ofstream(out / ".caseforge.lock") << "held\n";

  const std::string ingest_args = "ingest " + workflow_arg() + " --cases " +
                                  (testsup::fixtures_dir() / "cases_3.jsonl").string() +
                                  " --format jsonl --out " + out.string();
  const CliResult blocked = run_cli(ingest_args, dir.path());
  CHECK(blocked.exit_code == 1);
  CHECK(json::parse(blocked.stderr_text).at("code") == "lock");

  const CliResult forced = run_cli(ingest_args + " --force", dir.path());
  CHECK(forced.exit_code == 0);
  CHECK_FALSE(std::filesystem::exists(out / ".caseforge.lock"));
}

TEST_CASE("jsonl ingest + generate + resume on the 3-case fixture") {
  testsup::TempDir dir;
  const auto out = dir.path() / "out";

  const CliResult ingest = run_cli(
      "ingest " + workflow_arg() + " --cases " +
          (testsup::fixtures_dir() / "cases_3.jsonl").string() + " --format jsonl --out " +
          out.string(),
      dir.path());
  REQUIRE(ingest.exit_code == 0);
  CHECK(std::filesystem::exists(out / "manifest.ingest.json"));
  CHECK(caseforge::jsonl::read_file(out / "retained.jsonl").size() == 3);

  const CliResult generate =
      run_cli("generate " + workflow_arg() + " --out " + out.string(), dir.path());
  REQUIRE(generate.exit_code == 0);
  // A002 has no diff_diagnostic, so its differential_diagnosis unit is
  // quarantined under the strict render policy: 3 x 7 - 1.
  CHECK(caseforge::jsonl::read_file(out / "conversations.jsonl").size() == 20);
  const auto quarantine = caseforge::jsonl::read_file(out / "quarantine.generate.jsonl");
  REQUIRE(quarantine.size() == 1);
  CHECK(quarantine[0].at("case_id") == "A002");
  CHECK(quarantine[0].at("reason").get<std::string>().find("diff_diagnostic") !=
        std::string::npos);

  // Resume: everything already present, the quarantined unit is retried.
  const CliResult resume =
      run_cli("generate " + workflow_arg() + " --out " + out.string() + " --resume", dir.path());
  REQUIRE(resume.exit_code == 0);
  const json manifest = caseforge::jsonl::read_json_file(out / "manifest.generate.json");
  CHECK(manifest.at("counts").at("generated") == 0);
  CHECK(manifest.at("counts").at("skipped") == 20);
  CHECK(manifest.at("counts").at("conversations") == 20);
  CHECK(manifest.at("counts").at("quarantined") == 1);
  CHECK(manifest.at("workflow").at("hash").get<std::string>().size() == 16);
}

TEST_CASE("eval ingests external responses and writes a metrics report") {
  testsup::TempDir dir;
  const auto out = dir.path() / "out";
  const CliResult result = run_cli(
      "eval --items " + (testsup::fixtures_dir() / "eval_items.jsonl").string() +
          " --responses " + (testsup::fixtures_dir() / "responses_external.jsonl").string() +
          " --taxonomy " + (testsup::fixtures_dir() / "taxonomy.json").string() + " --out " +
          out.string() + " --label external --seed 5 --resamples 500 --baseline-trials 500",
      dir.path());
  REQUIRE(result.exit_code == 0);
  CHECK(result.stdout_text.find("random_chance") != std::string::npos);
  CHECK(result.stdout_text.find("external") != std::string::npos);
  const json metrics = caseforge::jsonl::read_json_file(out / "metrics.external.json");
  CHECK(metrics.contains("organ"));
  CHECK(metrics.contains("neoplasm"));
  CHECK(metrics.contains("diffdx"));

  const CliResult report = run_cli("report --out " + out.string(), dir.path());
  CHECK(report.exit_code == 0);
  CHECK(std::filesystem::exists(out / "report.txt"));
}

TEST_CASE("report with nothing to show is an error") {
  testsup::TempDir dir;
  const CliResult result =
      run_cli("report --out " + (dir.path() / "empty").string(), dir.path());
  CHECK(result.exit_code == 1);
  CHECK(json::parse(result.stderr_text).at("code") == "stage_order");
}

TEST_CASE("unknown flags exit nonzero without a crash") {
  testsup::TempDir dir;
  const CliResult result = run_cli("ingest --nonsense", dir.path());
  CHECK(result.exit_code != 0);
}

TEST_CASE("cassette record then replay through the pipeline") {
  testsup::TempDir dir;
  // Self-contained workflow with inline templates so the cassette lands in
  // the scratch directory, not in the shared fixtures. The two tasks use
  // distinct templates: the cassette is keyed by request content, so
  // identical prompts would collapse into one entry.
  const auto workflow = dir.write("wf.json", R"({
    "schema_version": 1,
    "seed": 9,
    "languages": [],
    "default_backend": "record",
    "backends": {
      "record": {"kind": "cassette_record", "cassette": "cassette.jsonl", "model": "rec-model"},
      "replay": {"kind": "cassette_replay", "cassette": "cassette.jsonl", "model": "rec-model"}
    },
    "ingest": {"format": "jsonl"},
    "templates": {
      "chat": {"text": "Discuss case {{ case_id }}: {{ micro_protocol }}"},
      "vqa": {"text": "Quiz on case {{ case_id }}: {{ conclusion }}"}
    },
    "tasks": [
      {"name": "multi_turn", "template": "chat"},
      {"name": "short_vqa", "template": "vqa"}
    ]
  })");

  const auto out_record = dir.path() / "rec";
  const std::string cases =
      (testsup::fixtures_dir() / "cases_3.jsonl").string();

  auto stage = [&](const std::string& name, const std::filesystem::path& out,
                   const std::string& extra) {
    return run_cli(name + " --workflow " + workflow.string() + " --out " + out.string() + extra,
                   dir.path());
  };

  REQUIRE(stage("ingest", out_record, " --cases " + cases).exit_code == 0);
  REQUIRE(stage("generate", out_record, " --backend record").exit_code == 0);
  REQUIRE(std::filesystem::exists(dir.path() / "cassette.jsonl"));
  const auto cassette_rows = caseforge::jsonl::read_file(dir.path() / "cassette.jsonl");
  CHECK(cassette_rows.size() == 6);  // 3 cases x 2 tasks, distinct prompts
  CHECK(cassette_rows[0].contains("request_hash"));
  CHECK(cassette_rows[0].contains("request"));
  CHECK(cassette_rows[0].contains("response"));

  // Replay runs touch no network and are byte-identical to each other.
  const auto out_replay1 = dir.path() / "rep1";
  const auto out_replay2 = dir.path() / "rep2";
  for (const auto& out : {out_replay1, out_replay2}) {
    REQUIRE(stage("ingest", out, " --cases " + cases).exit_code == 0);
    REQUIRE(stage("generate", out, " --backend replay").exit_code == 0);
  }
  CHECK(caseforge::jsonl::read_text_file(out_replay1 / "conversations.jsonl") ==
        caseforge::jsonl::read_text_file(out_replay2 / "conversations.jsonl"));

  // Record and replay agree on everything except the provenance timestamp
  // (record mode may sit in front of a live backend and stamps real time).
  auto redacted = [](const std::filesystem::path& path) {
    std::vector<json> rows = caseforge::jsonl::read_file(path);
    for (json& row : rows) row["provenance"]["timestamp"] = "";
    std::string text;
    for (const json& row : rows) text += row.dump() + "\n";
    return text;
  };
  CHECK(redacted(out_record / "conversations.jsonl") ==
        redacted(out_replay1 / "conversations.jsonl"));

  // Replay with a workflow change that alters the request content: miss.
  const auto workflow2 = dir.write("wf2.json", R"({
    "schema_version": 1,
    "seed": 9,
    "languages": [],
    "default_backend": "replay",
    "backends": {
      "replay": {"kind": "cassette_replay", "cassette": "cassette.jsonl", "model": "rec-model"}
    },
    "ingest": {"format": "jsonl"},
    "templates": {"chat": {"text": "A different prompt for {{ case_id }}"}},
    "tasks": [{"name": "multi_turn", "template": "chat"}]
  })");
  const auto out_miss = dir.path() / "miss";
  REQUIRE(run_cli("ingest --workflow " + workflow2.string() + " --out " + out_miss.string() +
                      " --cases " + cases,
                  dir.path())
              .exit_code == 0);
  const CliResult miss = run_cli(
      "generate --workflow " + workflow2.string() + " --out " + out_miss.string(), dir.path());
  // Misses are quarantined per unit, so the command itself succeeds.
  REQUIRE(miss.exit_code == 0);
  const auto quarantine = caseforge::jsonl::read_file(out_miss / "quarantine.generate.jsonl");
  CHECK(quarantine.size() == 3);
  CHECK(quarantine[0].at("reason").get<std::string>().find("cassette_miss") !=
        std::string::npos);
}

TEST_CASE("diversify replaces high-frequency queries end to end") {
  testsup::TempDir dir;
  const auto workflow = dir.write("wf.json", R"({
    "schema_version": 1,
    "seed": 13,
    "languages": [],
    "default_backend": "mock",
    "backends": {"mock": {"kind": "mock", "model": "mock-model"}},
    "ingest": {"format": "csv"},
    "templates": {
      "chat": {"text": "Discuss case {{ case_id }}: {{ micro_protocol }}"},
      "vqa": {"text": "Quiz on case {{ case_id }}: {{ conclusion }}"},
      "judge": {"text": "Rate {{ conclusion }} vs {{ generated_text }}"},
      "diversify": {"text": "Rephrase {{ count }} ways:\n<<<QUERY>>>\n{{ query }}\n<<<END>>>\n<<<COUNT>>>{{ count }}<<<END>>>"}
    },
    "tasks": [
      {"name": "multi_turn", "template": "chat"},
      {"name": "short_vqa", "template": "vqa"}
    ],
    "judge": {"template": "judge"},
    "diversify": {"template": "diversify", "min_frequency": 10}
  })");

  const auto out = dir.path() / "out";
  const std::string base = "--workflow " + workflow.string() + " --out " + out.string();
  REQUIRE(run_cli("ingest " + base + " --cases " +
                      (testsup::fixtures_dir() / "cases_20.csv").string(),
                  dir.path())
              .exit_code == 0);
  REQUIRE(run_cli("generate " + base, dir.path()).exit_code == 0);
  REQUIRE(run_cli("judge " + base, dir.path()).exit_code == 0);
  REQUIRE(run_cli("diversify " + base, dir.path()).exit_code == 0);

  // Each task contributes two fixed user questions over 20 cases: four
  // qualifying queries at frequency 20 each.
  const json plan = caseforge::jsonl::read_json_file(out / "plan.json");
  CHECK(plan.at("queries").size() == 4);
  for (const json& planned : plan.at("queries")) {
    CHECK(planned.at("frequency") == 20);
    CHECK(planned.at("alternatives").size() == 20);
  }

  const json report = caseforge::jsonl::read_json_file(out / "diversify_report.json");
  CHECK(report.at("eligible_messages") == 80);
  CHECK(report.at("replaced_messages").get<size_t>() > 0);
  CHECK(caseforge::jsonl::read_text_file(out / "diversified.jsonl") !=
        caseforge::jsonl::read_text_file(out / "kept.jsonl"));

  // The plan can be fed back in unchanged (audit/reuse path).
  const auto plan_copy = dir.write("plan_copy.json", plan.dump());
  REQUIRE(run_cli("diversify " + base + " --plan " + plan_copy.string() + " --force",
                  dir.path())
              .exit_code == 0);
  const json report2 = caseforge::jsonl::read_json_file(out / "diversify_report.json");
  CHECK(report2.at("replaced_messages") == report.at("replaced_messages"));
}

TEST_CASE("organ items without a taxonomy are a config error") {
  testsup::TempDir dir;
  const CliResult result = run_cli(
      "eval --items " + (testsup::fixtures_dir() / "eval_items.jsonl").string() + " --out " +
          (dir.path() / "out").string() + " --resamples 10 --baseline-trials 10",
      dir.path());
  CHECK(result.exit_code == 1);
  const json error = json::parse(result.stderr_text);
  CHECK(error.at("code") == "config");
  CHECK(error.at("error").get<std::string>().find("taxonomy") != std::string::npos);
}
