#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "caseforge/chat_client.hpp"
#include "caseforge/conversation.hpp"
#include "caseforge/generate.hpp"
#include "caseforge/workflow.hpp"

namespace caseforge {

// Exact-string counts over user turns, after whitespace normalization.
using QueryHistogram = std::map<std::string, size_t>;

QueryHistogram count_user_queries(const ConversationSet& set);

// Tier per qualifying query (1 = least frequent, `tiers` = most frequent),
// split at frequency quartiles with ties going to the lower tier. A single
// qualifying query is the most frequent by definition and lands in the top
// tier.
std::map<std::string, int> stratify(const QueryHistogram& histogram, size_t min_frequency,
                                    int tiers = 4);

struct PlannedQuery {
  std::string query;  // normalized form
  size_t frequency = 0;
  int tier = 1;
  double replacement_rate = 0.0;
  std::vector<std::string> alternatives;
};

struct DiversificationPlan {
  size_t min_frequency = 100;
  std::uint64_t seed = 0;
  std::vector<double> tier_rates;
  std::map<std::string, PlannedQuery> queries;

  nlohmann::json to_json() const;
  static DiversificationPlan from_json(const nlohmann::json& doc);
};

DiversificationPlan build_plan(const QueryHistogram& histogram, size_t min_frequency,
                               const std::vector<double>& tier_rates, std::uint64_t seed);

// Asks the backend for `count` paraphrases per planned query. Queries whose
// generation fails are dropped from the plan and reported back.
std::vector<std::pair<std::string, std::string>> generate_alternatives(
    DiversificationPlan& plan, const WorkflowConfig& config, ChatClient& client,
    const GenerateOptions& options = {});

struct TierStats {
  int tier = 0;
  double configured_rate = 0.0;
  size_t occurrences = 0;
  size_t replaced = 0;

  double realized_rate() const {
    return occurrences == 0 ? 0.0 : static_cast<double>(replaced) / static_cast<double>(occurrences);
  }
};

struct DiversificationReport {
  std::vector<TierStats> tiers;
  size_t total_user_messages = 0;
  size_t eligible_messages = 0;
  size_t replaced_messages = 0;

  nlohmann::json to_json() const;
};

// Replaces each planned occurrence with probability = its tier rate, drawing
// from a stream keyed by (plan seed, conv_id, turn index) so the outcome is
// independent of iteration order. Assistant turns are never touched.
std::pair<ConversationSet, DiversificationReport> apply_diversification(
    const ConversationSet& set, const DiversificationPlan& plan);

}  // namespace caseforge
