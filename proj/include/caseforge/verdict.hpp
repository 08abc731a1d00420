#pragma once

#include <string>

#include <json.hpp>

namespace caseforge {

// The three rubric scores parsed from a judge response. `raw` keeps the
// verbatim model output for audit.
struct JudgeVerdict {
  int constraint_adherence = 0;  // {0, 1}
  int groundedness = 1;          // [1, 5]
  int clarity = 1;               // [1, 3]
  std::string constraint_justification;
  std::string groundedness_justification;
  std::string clarity_justification;
  std::string reasoning;
  std::string raw;

  nlohmann::json to_json() const;
};

}  // namespace caseforge
