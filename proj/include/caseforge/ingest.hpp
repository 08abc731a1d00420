#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "caseforge/record.hpp"

namespace caseforge {

enum class SourceFormat { kCsv, kJson, kJsonl };

SourceFormat parse_source_format(const std::string& name);

// Optional remapping of source column/field names onto CaseRecord fields,
// e.g. {"case_id": "id"}. Unmapped source fields land in the extras bag.
struct FieldMap {
  std::map<std::string, std::string> canonical_to_source;

  std::string source_name(const std::string& canonical) const;
};

CaseRecordSet load_cases(const std::filesystem::path& path, SourceFormat format,
                         const FieldMap& field_map = {});

// Retention stages, applied in policy order. Each drops the cases failing
// its predicate and records the attribution in the ledger.
//   dedup               keep first occurrence of each case_id
//   single_file         exactly one slide reference
//   require_report      micro_protocol and conclusion non-blank after trim
//   require_he          drop stains other than H&E (unknown passes here)
//   require_known_stain drop unknown stains
//   require_segmentable drop cases flagged non-segmentable
//   require_20x         drop 40x-digitised cases
struct FilterPolicy {
  std::vector<std::string> stages;

  static FilterPolicy standard();
};

struct LedgerStage {
  std::string stage;
  size_t input = 0;
  size_t retained = 0;
  size_t discarded = 0;
  std::string discard_reason;
};

struct FilterLedger {
  size_t input_total = 0;
  std::vector<LedgerStage> stages;

  size_t final_retained() const;
  size_t total_discarded() const;
  // input = retained + discarded at every stage, and stages chain.
  void check_conservation() const;
  nlohmann::json to_json() const;
};

std::pair<CaseRecordSet, FilterLedger> filter_cases(const CaseRecordSet& set,
                                                    const FilterPolicy& policy);

}  // namespace caseforge
