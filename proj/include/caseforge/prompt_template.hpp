#pragma once

#include <map>
#include <string>
#include <vector>

#include "caseforge/record.hpp"

namespace caseforge {

// Plain `{{ field }}` substitution, nothing more. Placeholder names are
// [A-Za-z0-9_]+ with optional surrounding spaces; no expressions, filters
// or conditionals.
struct PromptTemplate {
  std::string name;
  std::string raw;
  std::vector<std::string> placeholders;  // first-occurrence order, deduplicated
  std::string task_category;

  // Internal segmentation: literal chunks interleaved with placeholder refs.
  struct Segment {
    bool is_placeholder = false;
    std::string text;  // literal text, or the placeholder name
  };
  std::vector<Segment> segments;
};

PromptTemplate parse_template(const std::string& text, const std::string& name = "",
                              const std::string& task_category = "");

struct RenderOptions {
  // When true, a missing field renders as the empty string and is appended
  // to `missing` instead of raising.
  bool allow_blank = false;
  std::vector<std::string>* missing = nullptr;
};

std::string render(const PromptTemplate& tmpl, const std::map<std::string, std::string>& fields,
                   const RenderOptions& options = {});

std::string render(const PromptTemplate& tmpl, const CaseRecord& record,
                   const RenderOptions& options = {});

}  // namespace caseforge
