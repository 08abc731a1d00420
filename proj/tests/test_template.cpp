#include <doctest.h>

#include "caseforge/errors.hpp"
#include "caseforge/jsonl.hpp"
#include "caseforge/prompt_template.hpp"
#include "caseforge/rng.hpp"

#include "test_support.hpp"

using namespace caseforge;

TEST_CASE("placeholder extraction") {
  const PromptTemplate tmpl = parse_template("Report: {{ conclusion }}");
  REQUIRE(tmpl.placeholders.size() == 1);
  CHECK(tmpl.placeholders[0] == "conclusion");
}

TEST_CASE("placeholders deduplicate in first-occurrence order") {
  const PromptTemplate tmpl = parse_template("{{ a }} and {{ b }} and {{ a }}");
  REQUIRE(tmpl.placeholders.size() == 2);
  CHECK(tmpl.placeholders[0] == "a");
  CHECK(tmpl.placeholders[1] == "b");
}

TEST_CASE("delimiter errors") {
  CHECK_THROWS_WITH_AS(parse_template("broken {{ x"), doctest::Contains("no matching"), Error);
  CHECK_THROWS_WITH_AS(parse_template("orphan }} close"), doctest::Contains("no matching"),
                       Error);
  CHECK_THROWS_WITH_AS(parse_template("{{ outer {{ inner }} }}"), doctest::Contains("nested"),
                       Error);
  CHECK_THROWS_WITH_AS(parse_template("empty {{  }}"), doctest::Contains("empty placeholder"),
                       Error);
  CHECK_THROWS_WITH_AS(parse_template("bad {{ a b }}"), doctest::Contains("invalid placeholder"),
                       Error);
  CHECK_THROWS_AS(parse_template(""), Error);
}

TEST_CASE("spacing variants all parse to the same placeholder") {
  for (const char* raw : {"{{x}}", "{{ x }}", "{{x }}", "{{  x  }}"}) {
    const PromptTemplate tmpl = parse_template(raw);
    REQUIRE(tmpl.placeholders.size() == 1);
    CHECK(tmpl.placeholders[0] == "x");
  }
}

TEST_CASE("render without placeholders is the identity") {
  const std::string raw = "no substitution here { single } braces";
  CHECK(render(parse_template(raw), std::map<std::string, std::string>{}) == raw);
}

TEST_CASE("render substitutes byte-exactly") {
  const PromptTemplate tmpl = parse_template("A={{ a }};B={{ b }};A again={{ a }}");
  const std::map<std::string, std::string> fields = {{"a", "first\nvalue"}, {"b", "±two"}};
  CHECK(render(tmpl, fields) == "A=first\nvalue;B=±two;A again=first\nvalue");
}

TEST_CASE("missing field is a hard error naming the field") {
  CaseRecord record = testsup::make_record("A");
  record.diff_diagnostic = "";
  const PromptTemplate tmpl = parse_template("DD: {{ diff_diagnostic }}");
  CHECK_THROWS_WITH_AS(render(tmpl, record), doctest::Contains("diff_diagnostic"), Error);
}

TEST_CASE("allow-blank substitutes empty and logs the field") {
  CaseRecord record = testsup::make_record("A");
  record.diff_diagnostic = "";
  const PromptTemplate tmpl = parse_template("DD:[{{ diff_diagnostic }}]");
  std::vector<std::string> missing;
  RenderOptions options;
  options.allow_blank = true;
  options.missing = &missing;
  CHECK(render(tmpl, record, options) == "DD:[]");
  REQUIRE(missing.size() == 1);
  CHECK(missing[0] == "diff_diagnostic");
}

TEST_CASE("judge template render embeds the conclusion verbatim") {
  const std::string raw =
      jsonl::read_text_file(testsup::fixtures_dir() / "templates" / "judge.txt");
  const PromptTemplate tmpl = parse_template(raw, "judge");

  CaseRecord record = testsup::make_record("A007");
  record.conclusion = "Dermatofibroma with entrapped collagen, no atypia seen.";
  auto fields = record_fields(record);
  fields["generated_text"] = "[{\"role\":\"user\",\"content\":\"q\"}]";

  const std::string rendered = render(tmpl, fields);
  const size_t block = rendered.find("Source Report:");
  REQUIRE(block != std::string::npos);
  const size_t conclusion_at = rendered.find(record.conclusion);
  REQUIRE(conclusion_at != std::string::npos);
  CHECK(conclusion_at > block);
  CHECK(rendered.find("{{") == std::string::npos);
}

TEST_CASE("render is deterministic") {
  const PromptTemplate tmpl = parse_template("{{ a }}-{{ b }}-{{ a }}");
  const std::map<std::string, std::string> fields = {{"a", "x"}, {"b", "y"}};
  CHECK(render(tmpl, fields) == render(tmpl, fields));
}

TEST_CASE("round trip: values recoverable from rendered output") {
  // Known delimiters around each placeholder make offsets recoverable.
  const PromptTemplate tmpl = parse_template("<a>{{ a }}</a><b>{{ b }}</b>");
  Rng rng(99);
  for (int i = 0; i < 50; ++i) {
    std::string a;
    std::string b;
    for (int k = 0; k < 8; ++k) {
      a.push_back(static_cast<char>('A' + rng.below(26)));
      b.push_back(static_cast<char>('a' + rng.below(26)));
    }
    const std::string out = render(tmpl, {{"a", a}, {"b", b}});
    const size_t a_begin = out.find("<a>") + 3;
    const size_t a_end = out.find("</a>");
    const size_t b_begin = out.find("<b>") + 3;
    const size_t b_end = out.find("</b>");
    CHECK(out.substr(a_begin, a_end - a_begin) == a);
    CHECK(out.substr(b_begin, b_end - b_begin) == b);
  }
}
