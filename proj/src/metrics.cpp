#include "caseforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "caseforge/strings.hpp"

namespace caseforge {

using nlohmann::json;

std::string item_kind_to_string(ItemKind kind) {
  switch (kind) {
    case ItemKind::kOrgan: return "organ";
    case ItemKind::kNeoplasm: return "neoplasm";
    case ItemKind::kDiffDx: return "diffdx";
  }
  return "organ";
}

ItemKind item_kind_from_string(const std::string& name) {
  if (name == "organ") return ItemKind::kOrgan;
  if (name == "neoplasm") return ItemKind::kNeoplasm;
  if (name == "diffdx") return ItemKind::kDiffDx;
  fail("parse", "unknown eval item kind '" + name + "'");
}

void EvalItem::validate() const {
  if (item_id.empty()) fail("parse", "eval item has no item_id");
  switch (kind) {
    case ItemKind::kOrgan:
      if (truth.empty()) fail("parse", item_id + ": organ item needs a truth node id");
      break;
    case ItemKind::kNeoplasm:
      if (truth != "yes" && truth != "no") {
        fail("parse", item_id + ": neoplasm truth must be yes or no");
      }
      break;
    case ItemKind::kDiffDx: {
      if (options.size() < 2) fail("parse", item_id + ": diffdx item needs at least 2 options");
      if (std::find(options.begin(), options.end(), truth) == options.end()) {
        fail("parse", item_id + ": truth is not among the options");
      }
      break;
    }
  }
}

json EvalItem::to_json() const {
  return {{"item_id", item_id},   {"case_id", case_id},
          {"kind", item_kind_to_string(kind)}, {"question", question},
          {"options", options},   {"truth", truth},
          {"model_response", model_response}};
}

EvalItem EvalItem::from_json(const json& row, const std::string& location) {
  EvalItem item;
  try {
    item.item_id = row.at("item_id").get<std::string>();
    item.case_id = row.value("case_id", "");
    item.kind = item_kind_from_string(row.at("kind").get<std::string>());
    item.question = row.value("question", "");
    const json options_json = row.value("options", json::array());
    for (const json& option : options_json) {
      item.options.push_back(option.get<std::string>());
    }
    item.truth = row.at("truth").get<std::string>();
    item.model_response = row.value("model_response", "");
  } catch (const json::exception& ex) {
    fail("parse", location + ": " + ex.what());
  }
  item.validate();
  return item;
}

// ---------------------------------------------------------------------------
// Answer extraction

namespace {

bool contains_tokens(const std::vector<std::string>& words, const std::vector<std::string>& target) {
  if (target.empty() || target.size() > words.size()) return false;
  for (size_t start = 0; start + target.size() <= words.size(); ++start) {
    bool hit = true;
    for (size_t k = 0; k < target.size(); ++k) {
      if (words[start + k] != target[k]) {
        hit = false;
        break;
      }
    }
    if (hit) return true;
  }
  return false;
}

}  // namespace

std::optional<std::string> extract_choice_rules(const std::string& response,
                                                const std::vector<std::string>& options) {
  if (options.empty()) fail("parse", "extract_choice needs a non-empty option list");
  const std::vector<std::string> words = strings::fold_tokens(response, true);

  std::vector<std::string> hits;
  for (const std::string& option : options) {
    if (contains_tokens(words, strings::fold_tokens(option, true))) hits.push_back(option);
  }
  if (hits.size() == 1) return hits.front();
  if (hits.size() > 1) return std::nullopt;  // ambiguous

  // Binary lexicon fallback for yes/no questions.
  const bool binary = options.size() == 2 &&
                      ((options[0] == "yes" && options[1] == "no") ||
                       (options[0] == "no" && options[1] == "yes"));
  if (binary) {
    static const std::vector<std::string> kYes = {"yes", "present", "positive"};
    static const std::vector<std::string> kNo = {"no", "absent", "negative"};
    bool saw_yes = false;
    bool saw_no = false;
    for (const std::string& word : words) {
      for (const std::string& y : kYes) saw_yes = saw_yes || word == y;
      for (const std::string& n : kNo) saw_no = saw_no || word == n;
    }
    if (saw_yes != saw_no) return saw_yes ? std::string("yes") : std::string("no");
  }
  return std::nullopt;
}

std::optional<std::string> extract_choice(const std::string& response,
                                          const std::vector<std::string>& options,
                                          ChatClient* llm, const std::string& item_id,
                                          const std::string& model_id) {
  if (llm) {
    std::string prompt =
        "Extract the definitive answer from a model response.\n"
        "Reply with exactly one option, verbatim, and nothing else.\n"
        "If no single option is clearly chosen, reply with: unparsed\n"
        "<<<OPTIONS>>>\n";
    for (const std::string& option : options) prompt += option + "\n";
    prompt += "<<<END>>>\n<<<RESPONSE>>>\n" + response + "\n<<<END>>>\n";

    ChatRequest request;
    request.model_id = model_id;
    request.messages.push_back({"user", prompt});
    request.temperature = 0.0;
    request.request_tag = "extract:" + item_id;
    try {
      const std::string answer = strings::trim(llm->complete(request).content);
      for (const std::string& option : options) {
        if (answer == option) return option;
      }
      // Model refused or hallucinated an option: defer to the rules.
    } catch (const Error&) {
      // Extraction backend down: defer to the rules.
    }
  }
  return extract_choice_rules(response, options);
}

ScoredItem score_item(const EvalItem& item, const Taxonomy* taxonomy, ChatClient* llm,
                      const std::string& model_id) {
  item.validate();
  ScoredItem scored;
  scored.kind = item.kind;
  switch (item.kind) {
    case ItemKind::kOrgan: {
      if (!taxonomy) fail("config", "organ items need a taxonomy");
      const auto pred = normalize_answer(item.model_response, *taxonomy);
      scored.unparsed = !pred.has_value();
      scored.organ_score = hierarchical_score(pred, item.truth, *taxonomy);
      break;
    }
    case ItemKind::kNeoplasm: {
      const auto choice = extract_choice(item.model_response, {"yes", "no"}, llm, item.item_id,
                                         model_id);
      scored.truth_positive = item.truth == "yes";
      scored.unparsed = !choice.has_value();
      // Unparsed counts as a negative prediction (and as incorrect).
      scored.pred_positive = choice.has_value() && *choice == "yes";
      break;
    }
    case ItemKind::kDiffDx: {
      const auto choice = extract_choice(item.model_response, item.options, llm, item.item_id,
                                         model_id);
      scored.unparsed = !choice.has_value();
      scored.correct = choice.has_value() && *choice == item.truth;
      break;
    }
  }
  return scored;
}

// ---------------------------------------------------------------------------
// Statistics kernels

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const size_t lo = static_cast<size_t>(h);
  const size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

void run_replicates(size_t resamples, size_t n_stats, std::uint64_t seed,
                    const std::string& stream, const ReplicateFn& fn, std::vector<double>& out,
                    bool parallel) {
  out.assign(resamples * n_stats, 0.0);
  if (parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long long r = 0; r < static_cast<long long>(resamples); ++r) {
      Rng rng(derive_seed(seed, {stream, std::to_string(r)}));
      fn(rng, &out[static_cast<size_t>(r) * n_stats]);
    }
    return;
  }
  // Serial reference path; per-replicate seeding makes it bit-identical to
  // the parallel path above.
  for (size_t r = 0; r < resamples; ++r) {
    Rng rng(derive_seed(seed, {stream, std::to_string(r)}));
    fn(rng, &out[r * n_stats]);
  }
}

namespace {

struct Confusion {
  double tp = 0;
  double fp = 0;
  double fn = 0;

  double precision() const { return tp + fp == 0 ? 0.0 : 100.0 * tp / (tp + fp); }
  double recall() const { return tp + fn == 0 ? 0.0 : 100.0 * tp / (tp + fn); }
  double f1() const {
    const double p = precision();
    const double r = recall();
    return p + r == 0 ? 0.0 : 2.0 * p * r / (p + r);
  }
};

Confusion confusion_of(const std::vector<const ScoredItem*>& items,
                       const std::vector<size_t>* indices) {
  Confusion c;
  const size_t n = indices ? indices->size() : items.size();
  for (size_t i = 0; i < n; ++i) {
    const ScoredItem& item = *items[indices ? (*indices)[i] : i];
    if (item.pred_positive && item.truth_positive) ++c.tp;
    else if (item.pred_positive && !item.truth_positive) ++c.fp;
    else if (!item.pred_positive && item.truth_positive) ++c.fn;
  }
  return c;
}

MetricValue interval_from(double point, const std::vector<double>& replicates, size_t n_stats,
                          size_t stat_index) {
  std::vector<double> column;
  column.reserve(replicates.size() / n_stats);
  for (size_t i = stat_index; i < replicates.size(); i += n_stats) column.push_back(replicates[i]);
  MetricValue value;
  value.point = point;
  value.lo = std::min(percentile(column, 0.025), point);
  value.hi = std::max(percentile(column, 0.975), point);
  return value;
}

}  // namespace

MetricsReport compute_metrics(const std::vector<ScoredItem>& items, const CiConfig& ci,
                              const std::string& label) {
  MetricsReport report;
  report.label = label;

  std::vector<const ScoredItem*> organ;
  std::vector<const ScoredItem*> neoplasm;
  std::vector<const ScoredItem*> diffdx;
  for (const ScoredItem& item : items) {
    if (item.unparsed) ++report.unparsed_count;
    switch (item.kind) {
      case ItemKind::kOrgan: organ.push_back(&item); break;
      case ItemKind::kNeoplasm: neoplasm.push_back(&item); break;
      case ItemKind::kDiffDx: diffdx.push_back(&item); break;
    }
  }

  const size_t resamples = ci.resamples > 0 ? static_cast<size_t>(ci.resamples) : 1;

  if (!organ.empty()) {
    report.has_organ = true;
    report.organ_n = organ.size();
    double sum = 0;
    for (const ScoredItem* item : organ) sum += item->organ_score;
    const double point = sum / static_cast<double>(organ.size());

    std::vector<double> replicates;
    run_replicates(resamples, 1, ci.seed, "bootstrap/organ",
                   [&](Rng& rng, double* out) {
                     double total = 0;
                     for (size_t i = 0; i < organ.size(); ++i) {
                       total += organ[rng.below(organ.size())]->organ_score;
                     }
                     out[0] = total / static_cast<double>(organ.size());
                   },
                   replicates, ci.parallel);
    report.organ_score = interval_from(point, replicates, 1, 0);
  } else {
    report.notes.push_back("no organ items; kind omitted");
  }

  if (!neoplasm.empty()) {
    report.has_neoplasm = true;
    report.neoplasm_n = neoplasm.size();
    const Confusion point = confusion_of(neoplasm, nullptr);

    std::vector<double> replicates;
    run_replicates(resamples, 3, ci.seed, "bootstrap/neoplasm",
                   [&](Rng& rng, double* out) {
                     std::vector<size_t> indices(neoplasm.size());
                     for (size_t& index : indices) index = rng.below(neoplasm.size());
                     const Confusion c = confusion_of(neoplasm, &indices);
                     out[0] = c.precision();
                     out[1] = c.recall();
                     out[2] = c.f1();
                   },
                   replicates, ci.parallel);
    report.precision = interval_from(point.precision(), replicates, 3, 0);
    report.recall = interval_from(point.recall(), replicates, 3, 1);
    report.f1 = interval_from(point.f1(), replicates, 3, 2);
  } else {
    report.notes.push_back("no neoplasm items; kind omitted");
  }

  if (!diffdx.empty()) {
    report.has_diffdx = true;
    report.diffdx_n = diffdx.size();
    double correct = 0;
    for (const ScoredItem* item : diffdx) correct += item->correct ? 1.0 : 0.0;
    const double point = 100.0 * correct / static_cast<double>(diffdx.size());

    std::vector<double> replicates;
    run_replicates(resamples, 1, ci.seed, "bootstrap/diffdx",
                   [&](Rng& rng, double* out) {
                     double hits = 0;
                     for (size_t i = 0; i < diffdx.size(); ++i) {
                       if (diffdx[rng.below(diffdx.size())]->correct) ++hits;
                     }
                     out[0] = 100.0 * hits / static_cast<double>(diffdx.size());
                   },
                   replicates, ci.parallel);
    report.accuracy = interval_from(point, replicates, 1, 0);
  } else {
    report.notes.push_back("no diffdx items; kind omitted");
  }

  return report;
}

BaselineExpectation analytic_random_baseline(const std::vector<EvalItem>& items) {
  BaselineExpectation expectation;
  size_t positives = 0;
  size_t neoplasm_total = 0;
  double inverse_option_sum = 0;
  size_t diffdx_total = 0;
  for (const EvalItem& item : items) {
    if (item.kind == ItemKind::kNeoplasm) {
      ++neoplasm_total;
      if (item.truth == "yes") ++positives;
    } else if (item.kind == ItemKind::kDiffDx) {
      ++diffdx_total;
      inverse_option_sum += 1.0 / static_cast<double>(item.options.size());
    }
  }
  if (neoplasm_total > 0) {
    expectation.precision =
        100.0 * static_cast<double>(positives) / static_cast<double>(neoplasm_total);
    expectation.recall = 50.0;
    expectation.f1 = expectation.precision + expectation.recall == 0
                         ? 0.0
                         : 2.0 * expectation.precision * expectation.recall /
                               (expectation.precision + expectation.recall);
  }
  if (diffdx_total > 0) {
    expectation.accuracy = 100.0 * inverse_option_sum / static_cast<double>(diffdx_total);
  }
  return expectation;
}

MetricsReport random_baseline(const std::vector<EvalItem>& items, std::uint64_t seed,
                              int trials, bool parallel) {
  std::vector<bool> neoplasm_truth;
  std::vector<size_t> diffdx_options;
  for (const EvalItem& item : items) {
    item.validate();
    if (item.kind == ItemKind::kNeoplasm) {
      neoplasm_truth.push_back(item.truth == "yes");
    } else if (item.kind == ItemKind::kDiffDx) {
      diffdx_options.push_back(item.options.size());
    }
  }

  MetricsReport report;
  report.label = "random_chance";
  report.notes.push_back("organ omitted: uniform guessing is not defined for open answers");
  const size_t n_trials = trials > 0 ? static_cast<size_t>(trials) : 1;

  std::vector<double> replicates;
  run_replicates(n_trials, 4, seed, "baseline",
                 [&](Rng& rng, double* out) {
                   Confusion c;
                   for (const bool positive : neoplasm_truth) {
                     const bool guess_yes = rng.uniform() < 0.5;
                     if (guess_yes && positive) ++c.tp;
                     else if (guess_yes && !positive) ++c.fp;
                     else if (!guess_yes && positive) ++c.fn;
                   }
                   out[0] = c.precision();
                   out[1] = c.recall();
                   out[2] = c.f1();
                   double hits = 0;
                   for (const size_t n_options : diffdx_options) {
                     if (rng.below(n_options) == 0) ++hits;  // truth is one fixed option
                   }
                   out[3] = diffdx_options.empty()
                                ? 0.0
                                : 100.0 * hits / static_cast<double>(diffdx_options.size());
                 },
                 replicates, parallel);

  auto mean_of = [&](size_t stat_index) {
    double sum = 0;
    for (size_t i = stat_index; i < replicates.size(); i += 4) sum += replicates[i];
    return sum / static_cast<double>(n_trials);
  };

  if (!neoplasm_truth.empty()) {
    report.has_neoplasm = true;
    report.neoplasm_n = neoplasm_truth.size();
    report.precision = interval_from(mean_of(0), replicates, 4, 0);
    report.recall = interval_from(mean_of(1), replicates, 4, 1);
    report.f1 = interval_from(mean_of(2), replicates, 4, 2);
  }
  if (!diffdx_options.empty()) {
    report.has_diffdx = true;
    report.diffdx_n = diffdx_options.size();
    report.accuracy = interval_from(mean_of(3), replicates, 4, 3);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Report serialization and rendering

namespace {

json metric_to_json(const MetricValue& value) {
  return {{"point", value.point}, {"lo", value.lo}, {"hi", value.hi}};
}

MetricValue metric_from_json(const json& doc) {
  return {doc.value("point", 0.0), doc.value("lo", 0.0), doc.value("hi", 0.0)};
}

std::string fmt(double value, int decimals) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(decimals) << value;
  return out.str();
}

std::string cell(const MetricValue& value, int decimals) {
  return fmt(value.point, decimals) + " [" + fmt(value.lo, decimals) + "-" +
         fmt(value.hi, decimals) + "]";
}

}  // namespace

json MetricsReport::to_json() const {
  json doc = {{"label", label}, {"unparsed_count", unparsed_count}, {"notes", notes}};
  if (has_organ) {
    doc["organ"] = {{"score", metric_to_json(organ_score)}, {"n", organ_n}};
  }
  if (has_neoplasm) {
    doc["neoplasm"] = {{"precision", metric_to_json(precision)},
                       {"recall", metric_to_json(recall)},
                       {"f1", metric_to_json(f1)},
                       {"n", neoplasm_n}};
  }
  if (has_diffdx) {
    doc["diffdx"] = {{"accuracy", metric_to_json(accuracy)}, {"n", diffdx_n}};
  }
  return doc;
}

MetricsReport MetricsReport::from_json(const json& doc) {
  MetricsReport report;
  report.label = doc.value("label", "model");
  report.unparsed_count = doc.value("unparsed_count", size_t{0});
  const json notes_json = doc.value("notes", json::array());
  for (const json& note : notes_json) {
    report.notes.push_back(note.get<std::string>());
  }
  if (doc.contains("organ")) {
    report.has_organ = true;
    report.organ_score = metric_from_json(doc.at("organ").at("score"));
    report.organ_n = doc.at("organ").value("n", size_t{0});
  }
  if (doc.contains("neoplasm")) {
    report.has_neoplasm = true;
    report.precision = metric_from_json(doc.at("neoplasm").at("precision"));
    report.recall = metric_from_json(doc.at("neoplasm").at("recall"));
    report.f1 = metric_from_json(doc.at("neoplasm").at("f1"));
    report.neoplasm_n = doc.at("neoplasm").value("n", size_t{0});
  }
  if (doc.contains("diffdx")) {
    report.has_diffdx = true;
    report.accuracy = metric_from_json(doc.at("diffdx").at("accuracy"));
    report.diffdx_n = doc.at("diffdx").value("n", size_t{0});
  }
  return report;
}

std::string render_metrics_table(const std::vector<MetricsReport>& reports) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"Model", "Organ Score", "Prec (%)", "Rec (%)", "F1 (%)", "Acc (%)"});
  for (const MetricsReport& report : reports) {
    std::vector<std::string> row;
    row.push_back(report.label);
    row.push_back(report.has_organ ? cell(report.organ_score, 2) : "--");
    row.push_back(report.has_neoplasm ? cell(report.precision, 2) : "--");
    row.push_back(report.has_neoplasm ? cell(report.recall, 2) : "--");
    row.push_back(report.has_neoplasm ? cell(report.f1, 2) : "--");
    row.push_back(report.has_diffdx ? cell(report.accuracy, 2) : "--");
    rows.push_back(std::move(row));
  }

  std::vector<size_t> widths(rows.front().size(), 0);
  for (const auto& row : rows) {
    for (size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
  }

  std::ostringstream out;
  for (size_t r = 0; r < rows.size(); ++r) {
    for (size_t c = 0; c < rows[r].size(); ++c) {
      out << std::left << std::setw(static_cast<int>(widths[c]) + 2) << rows[r][c];
    }
    out << '\n';
    if (r == 0) {
      size_t total = 0;
      for (size_t width : widths) total += width + 2;
      out << std::string(total, '-') << '\n';
    }
  }
  return out.str();
}

}  // namespace caseforge
