#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "caseforge/chat_client.hpp"
#include "caseforge/rng.hpp"
#include "caseforge/taxonomy.hpp"

namespace caseforge {

enum class ItemKind { kOrgan, kNeoplasm, kDiffDx };

std::string item_kind_to_string(ItemKind kind);
ItemKind item_kind_from_string(const std::string& name);

struct EvalItem {
  std::string item_id;
  std::string case_id;
  ItemKind kind = ItemKind::kOrgan;
  std::string question;
  std::vector<std::string> options;  // empty for organ; {yes,no}; 3+ for diffdx
  std::string truth;                 // taxonomy node id, or an option
  std::string model_response;

  void validate() const;
  nlohmann::json to_json() const;
  static EvalItem from_json(const nlohmann::json& row, const std::string& location);
};

// Rule-based answer extraction: case-folded option containment on token
// boundaries, with a yes/no lexicon for binary items. Ambiguous responses
// (more than one option present) are unparsed, which is a value here.
std::optional<std::string> extract_choice_rules(const std::string& response,
                                                const std::vector<std::string>& options);

// Primary extractor is an LLM call with a fixed prompt; falls back to the
// rule-based extractor when the model's pick is not one of the options.
std::optional<std::string> extract_choice(const std::string& response,
                                          const std::vector<std::string>& options,
                                          ChatClient* llm = nullptr,
                                          const std::string& item_id = "",
                                          const std::string& model_id = "mock-model");

// Per-item outcome after extraction/scoring, the unit the bootstrap works on.
struct ScoredItem {
  ItemKind kind = ItemKind::kOrgan;
  double organ_score = 0.0;     // organ
  bool truth_positive = false;  // neoplasm
  bool pred_positive = false;   // neoplasm; false when unparsed
  bool correct = false;         // diffdx
  bool unparsed = false;
};

ScoredItem score_item(const EvalItem& item, const Taxonomy* taxonomy, ChatClient* llm = nullptr,
                      const std::string& model_id = "mock-model");

struct MetricValue {
  double point = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

struct MetricsReport {
  std::string label;

  bool has_organ = false;
  MetricValue organ_score;  // mean hierarchical score, 0..1
  size_t organ_n = 0;

  bool has_neoplasm = false;
  MetricValue precision;  // percent
  MetricValue recall;     // percent
  MetricValue f1;         // percent
  size_t neoplasm_n = 0;

  bool has_diffdx = false;
  MetricValue accuracy;  // percent
  size_t diffdx_n = 0;

  size_t unparsed_count = 0;
  std::vector<std::string> notes;

  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& doc);
};

struct CiConfig {
  int resamples = 10000;
  std::uint64_t seed = 0;
  bool parallel = true;  // OpenMP when available; results identical either way
};

// Point estimates plus seeded percentile-bootstrap 95% intervals. Kinds with
// zero items are omitted with a note.
MetricsReport compute_metrics(const std::vector<ScoredItem>& items, const CiConfig& ci = {},
                              const std::string& label = "model");

struct BaselineExpectation {
  double precision = 0.0;  // percent; equals prevalence of the positive class
  double recall = 50.0;
  double f1 = 0.0;
  double accuracy = 0.0;  // percent; mean over items of 1/|options|
};

// Closed-form expectations of the uniform guesser on a given item set.
BaselineExpectation analytic_random_baseline(const std::vector<EvalItem>& items);

// Monte-Carlo uniform guesser averaged over `trials`; intervals are the
// 2.5/97.5 percentiles of the per-trial statistics. Organ is omitted (a
// uniform guesser over taxonomy nodes is not part of the benchmark row).
MetricsReport random_baseline(const std::vector<EvalItem>& items, std::uint64_t seed,
                              int trials, bool parallel = true);

// Text table in the benchmark layout: one row per report, point estimates
// with bracketed intervals.
std::string render_metrics_table(const std::vector<MetricsReport>& reports);

// Shared replicate runner: fills `out` (resamples x n_stats, row-major) from
// a per-replicate seeded generator. The serial path is the reference; the
// OpenMP path must produce bit-identical output.
using ReplicateFn = std::function<void(Rng&, double*)>;
void run_replicates(size_t resamples, size_t n_stats, std::uint64_t seed,
                    const std::string& stream, const ReplicateFn& fn, std::vector<double>& out,
                    bool parallel);

// Type-7 (linear interpolation) quantile over a copy of `values`.
double percentile(std::vector<double> values, double q);

}  // namespace caseforge
