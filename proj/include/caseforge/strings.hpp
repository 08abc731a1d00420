#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace caseforge::strings {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// Trims and collapses every internal whitespace run to a single space.
// This is the normalization used for query-frequency counting.
std::string normalize_ws(std::string_view s);

// Case fold + replace punctuation with spaces + collapse. Used for taxonomy
// name matching ("Large Intestine." and "large intestine" fold identically).
std::string fold(std::string_view s);

// fold() followed by removal of leading articles (a/an/the) per token stream.
std::vector<std::string> fold_tokens(std::string_view s, bool strip_articles = false);

std::vector<std::string> split(std::string_view s, char delim);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

bool is_blank(std::string_view s);

// True when `s` is well-formed UTF-8 (JSON serialization requires it).
bool is_valid_utf8(std::string_view s);

}  // namespace caseforge::strings
