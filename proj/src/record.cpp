#include "caseforge/record.hpp"

#include "caseforge/errors.hpp"
#include "caseforge/strings.hpp"

namespace caseforge {

using nlohmann::json;

Stain parse_stain(const std::string& raw) {
  const std::string s = strings::fold(raw);
  if (s.empty() || s == "unknown") return Stain::kUnknown;
  if (s == "he" || s == "h e" || s == "hematoxylin and eosin" || s == "hematoxylin eosin") {
    return Stain::kHE;
  }
  return Stain::kOther;
}

Magnification parse_magnification(const std::string& raw) {
  const std::string s = strings::fold(raw);
  if (s == "x20" || s == "20x" || s == "20") return Magnification::kX20;
  if (s == "x40" || s == "40x" || s == "40") return Magnification::kX40;
  return Magnification::kUnknown;
}

std::string stain_to_string(Stain s, const std::string& other_name) {
  switch (s) {
    case Stain::kHE: return "HE";
    case Stain::kOther: return other_name.empty() ? "other" : other_name;
    case Stain::kUnknown: return "unknown";
  }
  return "unknown";
}

std::string magnification_to_string(Magnification m) {
  switch (m) {
    case Magnification::kX20: return "x20";
    case Magnification::kX40: return "x40";
    case Magnification::kUnknown: return "unknown";
  }
  return "unknown";
}

std::map<std::string, std::string> record_fields(const CaseRecord& record) {
  std::map<std::string, std::string> fields;
  // Blank-after-trim counts as missing, so such fields are omitted and a
  // strict render reports them instead of silently substituting "".
  auto put = [&](const char* key, const std::string& value) {
    if (!strings::is_blank(value)) fields[key] = value;
  };
  put("case_id", record.case_id);
  put("slide_refs", strings::join(record.slide_refs, ";"));
  fields["stain"] = stain_to_string(record.stain, record.stain_name);
  fields["magnification"] = magnification_to_string(record.magnification);
  fields["segmentable"] = record.segmentable ? "true" : "false";
  put("icd10", record.icd10);
  put("icd10_text", record.icd10_text);
  put("micro_protocol", record.micro_protocol);
  put("conclusion", record.conclusion);
  put("diff_diagnostic", record.diff_diagnostic);
  put("demographics", record.demographics);
  for (const auto& [key, value] : record.extras) {
    if (!strings::is_blank(value)) fields.emplace(key, value);
  }
  return fields;
}

json record_to_json(const CaseRecord& record) {
  json row;
  row["case_id"] = record.case_id;
  row["slide_refs"] = record.slide_refs;
  row["stain"] = stain_to_string(record.stain, record.stain_name);
  row["magnification"] = magnification_to_string(record.magnification);
  row["segmentable"] = record.segmentable;
  row["icd10"] = record.icd10;
  row["icd10_text"] = record.icd10_text;
  row["micro_protocol"] = record.micro_protocol;
  row["conclusion"] = record.conclusion;
  row["diff_diagnostic"] = record.diff_diagnostic;
  row["demographics"] = record.demographics;
  if (!record.extras.empty()) {
    row["extras"] = record.extras;
  }
  return row;
}

namespace {

std::string value_as_string(const json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

}  // namespace

CaseRecord record_from_json(const json& row, const std::string& location) {
  if (!row.is_object()) fail("parse", location + ": record is not a JSON object");
  CaseRecord record;
  record.source_location = location;
  for (const auto& item : row.items()) {
    const std::string& key = item.key();
    const json& v = item.value();
    if (key == "case_id") {
      record.case_id = value_as_string(v);
    } else if (key == "slide_refs") {
      if (v.is_array()) {
        for (const auto& ref : v) record.slide_refs.push_back(value_as_string(ref));
      } else if (!value_as_string(v).empty()) {
        record.slide_refs = strings::split(value_as_string(v), ';');
      }
    } else if (key == "stain") {
      const std::string raw = value_as_string(v);
      record.stain = parse_stain(raw);
      if (record.stain == Stain::kOther) record.stain_name = strings::trim(raw);
    } else if (key == "magnification") {
      record.magnification = parse_magnification(value_as_string(v));
    } else if (key == "segmentable") {
      if (v.is_boolean()) {
        record.segmentable = v.get<bool>();
      } else {
        const std::string s = strings::fold(value_as_string(v));
        record.segmentable = !(s == "false" || s == "0" || s == "no");
      }
    } else if (key == "icd10") {
      record.icd10 = value_as_string(v);
    } else if (key == "icd10_text") {
      record.icd10_text = value_as_string(v);
    } else if (key == "micro_protocol") {
      record.micro_protocol = value_as_string(v);
    } else if (key == "conclusion") {
      record.conclusion = value_as_string(v);
    } else if (key == "diff_diagnostic") {
      record.diff_diagnostic = value_as_string(v);
    } else if (key == "demographics") {
      record.demographics = value_as_string(v);
    } else if (key == "extras" && v.is_object()) {
      for (const auto& extra : v.items()) {
        record.extras[extra.key()] = value_as_string(extra.value());
      }
    } else {
      record.extras[key] = value_as_string(v);
    }
  }
  if (record.case_id.empty()) fail("missing_id", location + ": record has no case_id");
  return record;
}

}  // namespace caseforge
