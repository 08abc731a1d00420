#include "caseforge/prompt_template.hpp"

#include <algorithm>
#include <cctype>

#include "caseforge/errors.hpp"

namespace caseforge {

namespace {

bool is_name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

// Validates `  name  ` between the braces and returns the bare name.
std::string extract_name(const std::string& inside, const std::string& where) {
  size_t begin = 0;
  size_t end = inside.size();
  while (begin < end && inside[begin] == ' ') ++begin;
  while (end > begin && inside[end - 1] == ' ') --end;
  if (begin == end) fail("placeholder_name", where + ": empty placeholder name");
  for (size_t i = begin; i < end; ++i) {
    if (!is_name_char(inside[i])) {
      fail("placeholder_name", where + ": invalid placeholder name '" +
                                   inside.substr(begin, end - begin) + "'");
    }
  }
  return inside.substr(begin, end - begin);
}

}  // namespace

PromptTemplate parse_template(const std::string& text, const std::string& name,
                              const std::string& task_category) {
  if (text.empty()) fail("parse", "template '" + name + "' is empty");

  PromptTemplate tmpl;
  tmpl.name = name;
  tmpl.raw = text;
  tmpl.task_category = task_category;
  const std::string where = name.empty() ? "template" : "template '" + name + "'";

  std::string literal;
  size_t i = 0;
  while (i < text.size()) {
    if (text.compare(i, 2, "{{") == 0) {
      const size_t open = i;
      const size_t close = text.find("}}", open + 2);
      const size_t nested = text.find("{{", open + 2);
      if (close == std::string::npos) {
        fail("unbalanced", where + ": '{{' at offset " + std::to_string(open) +
                               " has no matching '}}'");
      }
      if (nested != std::string::npos && nested < close) {
        fail("unbalanced", where + ": nested '{{' inside placeholder at offset " +
                               std::to_string(open));
      }
      if (!literal.empty()) {
        tmpl.segments.push_back({false, literal});
        literal.clear();
      }
      const std::string placeholder = extract_name(text.substr(open + 2, close - open - 2), where);
      tmpl.segments.push_back({true, placeholder});
      if (std::find(tmpl.placeholders.begin(), tmpl.placeholders.end(), placeholder) ==
          tmpl.placeholders.end()) {
        tmpl.placeholders.push_back(placeholder);
      }
      i = close + 2;
    } else if (text.compare(i, 2, "}}") == 0) {
      fail("unbalanced", where + ": '}}' at offset " + std::to_string(i) +
                             " has no matching '{{'");
    } else {
      literal.push_back(text[i]);
      ++i;
    }
  }
  if (!literal.empty()) tmpl.segments.push_back({false, literal});
  return tmpl;
}

std::string render(const PromptTemplate& tmpl, const std::map<std::string, std::string>& fields,
                   const RenderOptions& options) {
  std::string out;
  out.reserve(tmpl.raw.size());
  for (const auto& segment : tmpl.segments) {
    if (!segment.is_placeholder) {
      out.append(segment.text);
      continue;
    }
    auto it = fields.find(segment.text);
    if (it != fields.end()) {
      out.append(it->second);
    } else if (options.allow_blank) {
      if (options.missing) options.missing->push_back(segment.text);
    } else {
      fail("missing_field", "template '" + tmpl.name + "': no value for placeholder '" +
                                segment.text + "'");
    }
  }
  return out;
}

std::string render(const PromptTemplate& tmpl, const CaseRecord& record,
                   const RenderOptions& options) {
  return render(tmpl, record_fields(record), options);
}

}  // namespace caseforge
