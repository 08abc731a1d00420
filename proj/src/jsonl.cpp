#include "caseforge/jsonl.hpp"

#include <fstream>
#include <sstream>

#include "caseforge/errors.hpp"
#include "caseforge/strings.hpp"

namespace caseforge::jsonl {

std::vector<json> read_file(const std::filesystem::path& path) {
  std::vector<json> rows;
  for_each_line(path, [&](const json& row, size_t) { rows.push_back(row); });
  return rows;
}

void for_each_line(const std::filesystem::path& path,
                   const std::function<void(const json&, size_t line_no)>& fn) {
  std::ifstream in(path);
  if (!in) fail("io", "cannot open " + path.string());
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (strings::is_blank(line)) continue;
    json row = json::parse(line, nullptr, false);
    if (row.is_discarded()) {
      fail("parse", path.string() + ":" + std::to_string(line_no) + ": malformed JSON line");
    }
    fn(row, line_no);
  }
}

void write_file(const std::filesystem::path& path, const std::vector<json>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail("io", "cannot write " + path.string());
  for (const json& row : rows) {
    out << row.dump() << '\n';
  }
}

void append_line(const std::filesystem::path& path, const json& row) {
  std::ofstream out(path, std::ios::app);
  if (!out) fail("io", "cannot append to " + path.string());
  out << row.dump() << '\n';
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("io", "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail("io", "cannot write " + path.string());
  out << text;
}

json read_json_file(const std::filesystem::path& path) {
  json value = json::parse(read_text_file(path), nullptr, false);
  if (value.is_discarded()) fail("parse", path.string() + ": malformed JSON");
  return value;
}

void write_json_file(const std::filesystem::path& path, const json& value) {
  write_text_file(path, value.dump(2) + "\n");
}

}  // namespace caseforge::jsonl
