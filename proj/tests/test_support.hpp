#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "caseforge/workflow.hpp"

namespace testsup {

inline std::filesystem::path fixtures_dir() {
  if (const char* env = std::getenv("CASEFORGE_FIXTURES")) return env;
  return std::filesystem::path(__FILE__).parent_path().parent_path() / "fixtures";
}

inline std::filesystem::path caseforge_bin() {
  if (const char* env = std::getenv("CASEFORGE_BIN")) return env;
  return {};
}

// Self-deleting scratch directory for tests that touch the filesystem.
class TempDir {
 public:
  TempDir() {
    const auto base = std::filesystem::temp_directory_path();
    std::mt19937_64 rng(std::random_device{}());
    for (;;) {
      path_ = base / ("caseforge_test_" + std::to_string(rng()));
      if (std::filesystem::create_directory(path_)) break;
    }
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

  std::filesystem::path write(const std::string& name, const std::string& content) const {
    const auto file = path_ / name;
    std::ofstream out(file, std::ios::binary);
    out << content;
    return file;
  }

 private:
  std::filesystem::path path_;
};

inline caseforge::WorkflowConfig fixture_workflow() {
  return caseforge::load_workflow(fixtures_dir() / "workflow.json");
}

// Small in-memory config for unit tests that do not need the full fixture.
inline caseforge::WorkflowConfig minimal_workflow() {
  caseforge::WorkflowConfig config;
  config.seed = 1;
  config.concurrency = 2;
  config.templates.emplace(
      "basic", caseforge::parse_template(
                   "Case {{ case_id }}: {{ micro_protocol }} / {{ conclusion }}", "basic"));
  config.templates.emplace(
      "translate",
      caseforge::parse_template("To {{ language }} ({{ role }}):\n<<<TEXT>>>\n{{ text }}\n<<<END>>>",
                                "translate"));
  config.templates.emplace(
      "judge", caseforge::parse_template("Judge {{ conclusion }} against {{ generated_text }}",
                                         "judge"));
  config.templates.emplace(
      "diversify",
      caseforge::parse_template(
          "Paraphrase {{ count }} times:\n<<<QUERY>>>\n{{ query }}\n<<<END>>>\n"
          "<<<COUNT>>>{{ count }}<<<END>>>",
          "diversify"));
  for (const char* task : {"short_vqa", "multi_turn", "detailed_description"}) {
    caseforge::TaskSpec spec;
    spec.name = task;
    spec.template_name = "basic";
    if (spec.name == "detailed_description") spec.question = "Provide a detailed description.";
    config.tasks.push_back(spec);
  }
  caseforge::BackendProfile mock;
  mock.name = "mock";
  config.backends.emplace("mock", mock);
  return config;
}

inline caseforge::CaseRecord make_record(const std::string& case_id) {
  caseforge::CaseRecord record;
  record.case_id = case_id;
  record.slide_refs = {case_id + ".tiff"};
  record.stain = caseforge::Stain::kHE;
  record.magnification = caseforge::Magnification::kX20;
  record.segmentable = true;
  record.icd10 = "K63.5";
  record.icd10_text = "Polyp of colon";
  record.micro_protocol = "Tubular glands with low-grade dysplasia, case " + case_id + ".";
  record.conclusion = "Tubular adenoma, case " + case_id + ".";
  record.diff_diagnostic = "Adenoma; hyperplastic polyp.";
  return record;
}

}  // namespace testsup
