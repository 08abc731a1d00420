#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace caseforge::jsonl {

using json = nlohmann::json;

// Reads every non-empty line as a JSON value. Throws Error("parse") with the
// file and 1-based line number on malformed input.
std::vector<json> read_file(const std::filesystem::path& path);

void for_each_line(const std::filesystem::path& path,
                   const std::function<void(const json&, size_t line_no)>& fn);

// One compact JSON document per line. dump() sorts object keys, which keeps
// output byte-stable across runs.
void write_file(const std::filesystem::path& path, const std::vector<json>& rows);

void append_line(const std::filesystem::path& path, const json& row);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& value);

}  // namespace caseforge::jsonl
