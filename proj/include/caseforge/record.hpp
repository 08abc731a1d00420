#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace caseforge {

enum class Stain { kHE, kOther, kUnknown };
enum class Magnification { kX20, kX40, kUnknown };

Stain parse_stain(const std::string& raw);
Magnification parse_magnification(const std::string& raw);
std::string stain_to_string(Stain s, const std::string& other_name);
std::string magnification_to_string(Magnification m);

// One clinical case's metadata, the unit every template is rendered against.
struct CaseRecord {
  std::string case_id;
  std::vector<std::string> slide_refs;
  Stain stain = Stain::kUnknown;
  std::string stain_name;  // original label when stain == kOther
  Magnification magnification = Magnification::kUnknown;
  bool segmentable = true;
  std::string icd10;
  std::string icd10_text;
  std::string micro_protocol;
  std::string conclusion;
  std::string diff_diagnostic;
  std::string demographics;
  std::map<std::string, std::string> extras;  // unmapped source fields
  std::string source_location;                // "file:row", for error reports
};

struct CaseRecordSet {
  std::vector<CaseRecord> records;

  size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

// Field names a template placeholder may reference. Extras keys extend this.
std::map<std::string, std::string> record_fields(const CaseRecord& record);

nlohmann::json record_to_json(const CaseRecord& record);
CaseRecord record_from_json(const nlohmann::json& row, const std::string& location);

}  // namespace caseforge
