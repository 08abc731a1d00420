#include "caseforge/ingest.hpp"

#include <functional>
#include <unordered_map>

#include "caseforge/errors.hpp"
#include "caseforge/jsonl.hpp"
#include "caseforge/strings.hpp"

namespace caseforge {

using nlohmann::json;

SourceFormat parse_source_format(const std::string& name) {
  const std::string s = strings::to_lower(strings::trim(name));
  if (s == "csv") return SourceFormat::kCsv;
  if (s == "json") return SourceFormat::kJson;
  if (s == "jsonl") return SourceFormat::kJsonl;
  fail("format", "unknown source format '" + name + "' (expected csv, json or jsonl)");
}

std::string FieldMap::source_name(const std::string& canonical) const {
  auto it = canonical_to_source.find(canonical);
  return it == canonical_to_source.end() ? canonical : it->second;
}

namespace {

// RFC 4180: quoted fields may contain commas, doubled quotes and newlines.
std::vector<std::vector<std::string>> parse_csv(const std::string& text,
                                                const std::string& origin) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;

  auto end_field = [&] {
    row.push_back(field_was_quoted ? field : strings::trim(field));
    field.clear();
    field_was_quoted = false;
  };
  auto end_row = [&] {
    end_field();
    bool all_empty = true;
    for (const auto& f : row) {
      if (!f.empty()) { all_empty = false; break; }
    }
    if (!all_empty || row.size() > 1) rows.push_back(row);
    row.clear();
  };

  for (size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (strings::is_blank(field)) {
          in_quotes = true;
          field_was_quoted = true;
          field.clear();
        } else {
          field.push_back(c);
        }
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        end_row();
        break;
      default:
        field.push_back(c);
    }
  }
  if (in_quotes) fail("parse", origin + ": unterminated quoted CSV field");
  if (!field.empty() || !row.empty()) end_row();
  return rows;
}

json csv_row_to_object(const std::vector<std::string>& header,
                       const std::vector<std::string>& row) {
  json obj = json::object();
  for (size_t i = 0; i < header.size(); ++i) {
    obj[header[i]] = i < row.size() ? row[i] : "";
  }
  return obj;
}

// Renames mapped source fields to their canonical names before record
// construction; everything else stays put and falls into extras.
json apply_field_map(const json& obj, const FieldMap& field_map) {
  if (field_map.canonical_to_source.empty()) return obj;
  json out = obj;
  for (const auto& [canonical, source] : field_map.canonical_to_source) {
    if (canonical == source) continue;
    if (out.contains(source)) {
      out[canonical] = out[source];
      out.erase(source);
    }
  }
  return out;
}

void check_duplicates(const CaseRecordSet& set) {
  std::unordered_map<std::string, const CaseRecord*> seen;
  for (const CaseRecord& record : set.records) {
    auto [it, inserted] = seen.emplace(record.case_id, &record);
    if (!inserted) {
      fail("duplicate_id", "duplicate case_id '" + record.case_id + "' at " +
                               it->second->source_location + " and " + record.source_location);
    }
  }
}

}  // namespace

CaseRecordSet load_cases(const std::filesystem::path& path, SourceFormat format,
                         const FieldMap& field_map) {
  CaseRecordSet set;
  const std::string origin = path.string();

  switch (format) {
    case SourceFormat::kCsv: {
      const std::string text = jsonl::read_text_file(path);
      if (!strings::is_valid_utf8(text)) {
        fail("parse", origin + ": file is not valid UTF-8");
      }
      auto rows = parse_csv(text, origin);
      if (rows.empty()) fail("parse", origin + ": CSV file has no header row");
      const auto& header = rows.front();
      const std::string id_column = field_map.source_name("case_id");
      bool has_id = false;
      for (const auto& name : header) {
        if (name == id_column) { has_id = true; break; }
      }
      if (!has_id) fail("missing_id", origin + ": missing mandatory id column '" + id_column + "'");
      for (size_t r = 1; r < rows.size(); ++r) {
        const std::string location = origin + ":row " + std::to_string(r + 1);
        json obj = apply_field_map(csv_row_to_object(header, rows[r]), field_map);
        set.records.push_back(record_from_json(obj, location));
      }
      break;
    }
    case SourceFormat::kJson: {
      json doc = jsonl::read_json_file(path);
      if (!doc.is_array()) fail("parse", origin + ": expected a JSON array of records");
      size_t index = 0;
      for (const json& obj : doc) {
        ++index;
        const std::string location = origin + ":item " + std::to_string(index);
        set.records.push_back(record_from_json(apply_field_map(obj, field_map), location));
      }
      break;
    }
    case SourceFormat::kJsonl: {
      jsonl::for_each_line(path, [&](const json& obj, size_t line_no) {
        const std::string location = origin + ":line " + std::to_string(line_no);
        set.records.push_back(record_from_json(apply_field_map(obj, field_map), location));
      });
      break;
    }
  }

  check_duplicates(set);
  return set;
}

FilterPolicy FilterPolicy::standard() {
  return FilterPolicy{{"dedup", "single_file", "require_report", "require_he",
                       "require_known_stain", "require_segmentable", "require_20x"}};
}

size_t FilterLedger::final_retained() const {
  return stages.empty() ? input_total : stages.back().retained;
}

size_t FilterLedger::total_discarded() const {
  size_t total = 0;
  for (const auto& stage : stages) total += stage.discarded;
  return total;
}

void FilterLedger::check_conservation() const {
  size_t expected_input = input_total;
  for (const auto& stage : stages) {
    if (stage.input != expected_input) {
      fail("ledger", "stage '" + stage.stage + "' input " + std::to_string(stage.input) +
                         " does not chain from previous retained " +
                         std::to_string(expected_input));
    }
    if (stage.retained + stage.discarded != stage.input) {
      fail("ledger", "stage '" + stage.stage + "' loses cases: " +
                         std::to_string(stage.retained) + " + " + std::to_string(stage.discarded) +
                         " != " + std::to_string(stage.input));
    }
    expected_input = stage.retained;
  }
  if (final_retained() + total_discarded() != input_total) {
    fail("ledger", "ledger totals do not add up to input_total");
  }
}

json FilterLedger::to_json() const {
  json stages_json = json::array();
  for (const auto& stage : stages) {
    stages_json.push_back({{"stage", stage.stage},
                           {"input", stage.input},
                           {"retained", stage.retained},
                           {"discarded", stage.discarded},
                           {"discard_reason", stage.discard_reason}});
  }
  return {{"input_total", input_total},
          {"final_retained", final_retained()},
          {"total_discarded", total_discarded()},
          {"stages", stages_json}};
}

namespace {

struct StageDef {
  std::string reason;
  std::function<bool(const CaseRecord&)> keep;
};

const std::unordered_map<std::string, StageDef>& stage_defs() {
  static const std::unordered_map<std::string, StageDef> defs = {
      {"single_file",
       {"multi-file case", [](const CaseRecord& r) { return r.slide_refs.size() == 1; }}},
      {"require_report",
       {"missing microscopic description or conclusion",
        [](const CaseRecord& r) {
          return !strings::is_blank(r.micro_protocol) && !strings::is_blank(r.conclusion);
        }}},
      {"require_he",
       {"non-H&E stain", [](const CaseRecord& r) { return r.stain != Stain::kOther; }}},
      {"require_known_stain",
       {"unknown stain", [](const CaseRecord& r) { return r.stain != Stain::kUnknown; }}},
      {"require_segmentable",
       {"below segmentation threshold", [](const CaseRecord& r) { return r.segmentable; }}},
      {"require_20x",
       {"digitised at 40x",
        [](const CaseRecord& r) { return r.magnification != Magnification::kX40; }}},
  };
  return defs;
}

}  // namespace

std::pair<CaseRecordSet, FilterLedger> filter_cases(const CaseRecordSet& set,
                                                    const FilterPolicy& policy) {
  FilterLedger ledger;
  ledger.input_total = set.size();

  CaseRecordSet current = set;
  for (const std::string& stage_name : policy.stages) {
    LedgerStage stage;
    stage.stage = stage_name;
    stage.input = current.size();

    CaseRecordSet next;
    next.records.reserve(current.size());

    if (stage_name == "dedup") {
      stage.discard_reason = "duplicate case_id";
      std::unordered_map<std::string, bool> seen;
      for (CaseRecord& record : current.records) {
        if (seen.emplace(record.case_id, true).second) {
          next.records.push_back(std::move(record));
        }
      }
    } else {
      auto it = stage_defs().find(stage_name);
      if (it == stage_defs().end()) {
        fail("unknown_stage", "unknown filter stage '" + stage_name + "'");
      }
      stage.discard_reason = it->second.reason;
      for (CaseRecord& record : current.records) {
        if (it->second.keep(record)) next.records.push_back(std::move(record));
      }
    }

    stage.retained = next.size();
    stage.discarded = stage.input - stage.retained;
    ledger.stages.push_back(stage);
    current = std::move(next);
  }

  ledger.check_conservation();
  return {std::move(current), std::move(ledger)};
}

}  // namespace caseforge
