#include "caseforge/diversify.hpp"

#include <algorithm>
#include <cmath>

#include "caseforge/hash.hpp"
#include "caseforge/rng.hpp"
#include "caseforge/strings.hpp"

namespace caseforge {

using nlohmann::json;

QueryHistogram count_user_queries(const ConversationSet& set) {
  QueryHistogram histogram;
  for (const Conversation& conv : set.conversations) {
    for (const Turn& turn : conv.turns) {
      if (turn.role == "user") ++histogram[strings::normalize_ws(turn.content)];
    }
  }
  return histogram;
}

std::map<std::string, int> stratify(const QueryHistogram& histogram, size_t min_frequency,
                                    int tiers) {
  if (tiers < 2) fail("config", "stratification needs at least 2 tiers");

  std::vector<std::pair<std::string, size_t>> qualifying;
  for (const auto& [query, count] : histogram) {
    if (count >= min_frequency) qualifying.emplace_back(query, count);
  }
  std::map<std::string, int> assignment;
  if (qualifying.empty()) return assignment;

  // Degenerate stratification: a lone qualifying query is by definition the
  // most frequent one and takes the top tier.
  if (qualifying.size() == 1) {
    assignment[qualifying.front().first] = tiers;
    return assignment;
  }

  std::vector<size_t> freqs;
  freqs.reserve(qualifying.size());
  for (const auto& [query, count] : qualifying) freqs.push_back(count);
  std::sort(freqs.begin(), freqs.end());

  // Quartile boundaries by rank; assignment by `frequency <= boundary` sends
  // ties to the lower tier.
  const size_t n = freqs.size();
  std::vector<size_t> boundaries;
  for (int k = 1; k < tiers; ++k) {
    const size_t rank = (n * static_cast<size_t>(k) + static_cast<size_t>(tiers) - 1) /
                        static_cast<size_t>(tiers);  // ceil(n*k/tiers)
    boundaries.push_back(freqs[rank - 1]);
  }

  for (const auto& [query, count] : qualifying) {
    int tier = tiers;
    for (int k = 0; k < tiers - 1; ++k) {
      if (count <= boundaries[static_cast<size_t>(k)]) {
        tier = k + 1;
        break;
      }
    }
    assignment[query] = tier;
  }
  return assignment;
}

json DiversificationPlan::to_json() const {
  json queries_json = json::array();
  for (const auto& [query, planned] : queries) {
    queries_json.push_back({{"query", planned.query},
                            {"frequency", planned.frequency},
                            {"tier", planned.tier},
                            {"replacement_rate", planned.replacement_rate},
                            {"alternatives", planned.alternatives}});
  }
  return {{"min_frequency", min_frequency},
          {"seed", seed},
          {"tier_rates", tier_rates},
          {"queries", queries_json}};
}

DiversificationPlan DiversificationPlan::from_json(const json& doc) {
  DiversificationPlan plan;
  plan.min_frequency = doc.value("min_frequency", size_t{100});
  plan.seed = doc.value("seed", std::uint64_t{0});
  const json rates_json = doc.value("tier_rates", json::array());
  for (const json& rate : rates_json) {
    plan.tier_rates.push_back(rate.get<double>());
  }
  const json queries_json = doc.value("queries", json::array());
  for (const json& entry : queries_json) {
    PlannedQuery planned;
    planned.query = entry.at("query").get<std::string>();
    planned.frequency = entry.at("frequency").get<size_t>();
    planned.tier = entry.at("tier").get<int>();
    planned.replacement_rate = entry.at("replacement_rate").get<double>();
    const json alts_json = entry.value("alternatives", json::array());
    for (const json& alt : alts_json) {
      planned.alternatives.push_back(alt.get<std::string>());
    }
    plan.queries.emplace(planned.query, std::move(planned));
  }
  return plan;
}

DiversificationPlan build_plan(const QueryHistogram& histogram, size_t min_frequency,
                               const std::vector<double>& tier_rates, std::uint64_t seed) {
  DiversificationPlan plan;
  plan.min_frequency = min_frequency;
  plan.seed = seed;
  plan.tier_rates = tier_rates;

  const auto assignment = stratify(histogram, min_frequency, static_cast<int>(tier_rates.size()));
  for (const auto& [query, tier] : assignment) {
    PlannedQuery planned;
    planned.query = query;
    planned.frequency = histogram.at(query);
    planned.tier = tier;
    planned.replacement_rate = tier_rates[static_cast<size_t>(tier - 1)];
    plan.queries.emplace(query, std::move(planned));
  }
  return plan;
}

std::vector<std::pair<std::string, std::string>> generate_alternatives(
    DiversificationPlan& plan, const WorkflowConfig& config, ChatClient& client,
    const GenerateOptions& options) {
  const PromptTemplate& tmpl = config.require_template(config.diversify_template);
  std::vector<PlannedQuery*> pending;
  for (auto& [query, planned] : plan.queries) {
    if (planned.alternatives.empty()) pending.push_back(&planned);
  }

  std::vector<std::pair<std::string, std::string>> skipped;
  std::mutex mutex;
  parallel_units(pending.size(), config.concurrency, [&](size_t i) {
    PlannedQuery& planned = *pending[i];
    try {
      std::map<std::string, std::string> fields = {
          {"query", planned.query}, {"count", std::to_string(config.alternatives_count)}};
      ChatRequest request;
      request.model_id = options.model_id;
      request.messages.push_back({"user", render(tmpl, fields)});
      request.temperature = config.generation_temperature;
      request.request_tag = "divalt:" + hex16(fnv1a64(planned.query)).substr(0, 12);

      const std::string content = client.complete(request).content;
      json array = json::parse(slice_outer_json(content), nullptr, false);
      if (array.is_discarded() || !array.is_array()) {
        fail("schema", "alternatives response is not a JSON array");
      }
      std::vector<std::string> alternatives;
      for (const json& alt : array) {
        if (!alt.is_string()) fail("schema", "alternatives must be strings");
        alternatives.push_back(alt.get<std::string>());
      }
      if (alternatives.size() < static_cast<size_t>(config.alternatives_count)) {
        fail("schema", "expected " + std::to_string(config.alternatives_count) +
                           " alternatives, got " + std::to_string(alternatives.size()));
      }
      alternatives.resize(static_cast<size_t>(config.alternatives_count));
      planned.alternatives = std::move(alternatives);
    } catch (const Error& error) {
      std::lock_guard lock(mutex);
      skipped.emplace_back(planned.query, error.code() + std::string(": ") + error.what());
    }
  });

  for (const auto& [query, reason] : skipped) plan.queries.erase(query);
  std::sort(skipped.begin(), skipped.end());
  return skipped;
}

json DiversificationReport::to_json() const {
  json tiers_json = json::array();
  for (const TierStats& stats : tiers) {
    tiers_json.push_back({{"tier", stats.tier},
                          {"configured_rate", stats.configured_rate},
                          {"occurrences", stats.occurrences},
                          {"replaced", stats.replaced},
                          {"realized_rate", stats.realized_rate()}});
  }
  const double coverage = total_user_messages == 0
                              ? 0.0
                              : static_cast<double>(eligible_messages) /
                                    static_cast<double>(total_user_messages);
  return {{"tiers", tiers_json},
          {"total_user_messages", total_user_messages},
          {"eligible_messages", eligible_messages},
          {"replaced_messages", replaced_messages},
          {"eligible_fraction", coverage}};
}

std::pair<ConversationSet, DiversificationReport> apply_diversification(
    const ConversationSet& set, const DiversificationPlan& plan) {
  DiversificationReport report;
  report.tiers.resize(plan.tier_rates.size());
  for (size_t t = 0; t < plan.tier_rates.size(); ++t) {
    report.tiers[t].tier = static_cast<int>(t + 1);
    report.tiers[t].configured_rate = plan.tier_rates[t];
  }

  ConversationSet out = set;
  for (Conversation& conv : out.conversations) {
    for (size_t t = 0; t < conv.turns.size(); ++t) {
      Turn& turn = conv.turns[t];
      if (turn.role != "user") continue;
      ++report.total_user_messages;
      auto it = plan.queries.find(strings::normalize_ws(turn.content));
      if (it == plan.queries.end()) continue;
      const PlannedQuery& planned = it->second;
      ++report.eligible_messages;
      TierStats& stats = report.tiers[static_cast<size_t>(planned.tier - 1)];
      ++stats.occurrences;

      Rng rng(derive_seed(plan.seed, {"diversify", conv.conv_id, std::to_string(t)}));
      if (rng.uniform() >= planned.replacement_rate || planned.alternatives.empty()) continue;
      turn.content = planned.alternatives[rng.below(planned.alternatives.size())];
      ++stats.replaced;
      ++report.replaced_messages;
    }
  }
  return {std::move(out), std::move(report)};
}

}  // namespace caseforge
