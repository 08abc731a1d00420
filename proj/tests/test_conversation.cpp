#include <doctest.h>

#include "caseforge/conversation.hpp"
#include "caseforge/errors.hpp"

using namespace caseforge;

TEST_CASE("plain json conversation") {
  const auto turns =
      parse_conversation(R"([{"role":"user","content":"q"},{"role":"assistant","content":"a"}])",
                         "multi_turn");
  REQUIRE(turns.size() == 2);
  CHECK(turns[0].role == "user");
  CHECK(turns[1].content == "a");
}

TEST_CASE("fenced and prose-wrapped json parses to the same turns") {
  const std::string wrapped =
      "Sure! Here is the conversation you asked for:\n"
      "```json\n"
      "[{\"role\":\"user\",\"content\":\"q\"},{\"role\":\"assistant\",\"content\":\"a\"}]\n"
      "```\n"
      "Hope that helps.";
  const auto turns = parse_conversation(wrapped, "multi_turn");
  REQUIRE(turns.size() == 2);
  CHECK(turns[0].content == "q");
  CHECK(turns[1].content == "a");
}

TEST_CASE("assistant-first violates alternation") {
  CHECK_THROWS_WITH_AS(
      parse_conversation(R"([{"role":"assistant","content":"a"}])", "multi_turn"),
      doctest::Contains("expected 'user'"), Error);
}

TEST_CASE("leading system turn is allowed, two are not") {
  const auto turns = parse_conversation(
      R"([{"role":"system","content":"s"},{"role":"user","content":"q"},
          {"role":"assistant","content":"a"}])",
      "multi_turn");
  CHECK(turns.size() == 3);
  CHECK_THROWS_AS(parse_conversation(
                      R"([{"role":"system","content":"s"},{"role":"system","content":"s2"},
                          {"role":"user","content":"q"}])",
                      "multi_turn"),
                  Error);
}

TEST_CASE("bare text is accepted for single-turn tasks only") {
  const auto turns =
      parse_conversation("The slide shows benign tissue.", "detailed_description",
                         "Provide a detailed description of the slide.");
  REQUIRE(turns.size() == 2);
  CHECK(turns[0].role == "user");
  CHECK(turns[0].content == "Provide a detailed description of the slide.");
  CHECK(turns[1].role == "assistant");
  CHECK(turns[1].content == "The slide shows benign tissue.");

  CHECK_THROWS_WITH_AS(parse_conversation("No JSON to be found here.", "multi_turn"),
                       doctest::Contains("no JSON"), Error);
}

TEST_CASE("brackets inside prose do not derail single-turn parsing") {
  const auto turns = parse_conversation("Fragments {of stroma} are seen.", "clean_report",
                                        "Write the structured report for this slide.");
  REQUIRE(turns.size() == 2);
  CHECK(turns[1].content == "Fragments {of stroma} are seen.");
}

TEST_CASE("object with a messages array is accepted") {
  const auto turns = parse_conversation(
      R"({"messages":[{"role":"user","content":"q"},{"role":"assistant","content":"a"}]})",
      "short_vqa");
  CHECK(turns.size() == 2);
}

TEST_CASE("turn schema violations are rejected") {
  CHECK_THROWS_AS(parse_conversation(R"([{"role":"user"}])", "multi_turn"), Error);
  CHECK_THROWS_AS(parse_conversation(R"([{"content":"x"}])", "multi_turn"), Error);
  CHECK_THROWS_AS(parse_conversation(R"([{"role":42,"content":"x"}])", "multi_turn"), Error);
  CHECK_THROWS_AS(parse_conversation(R"([{"role":"narrator","content":"x"}])", "multi_turn"),
                  Error);
  CHECK_THROWS_AS(parse_conversation("", "multi_turn"), Error);
}

TEST_CASE("outer json slicing is string-aware") {
  CHECK(slice_outer_json(R"!(noise [1, "a ] b", 2] tail)!") == R"!([1, "a ] b", 2])!");
  CHECK(slice_outer_json(R"({"k":"v{\"esc\"}"} rest)") == R"({"k":"v{\"esc\"}"})");
  CHECK(slice_outer_json("no brackets at all") == "");
  CHECK(slice_outer_json("unclosed [1, 2") == "");
}

TEST_CASE("conversation json round trip") {
  Conversation conv;
  conv.conv_id = "C1:short_vqa:en";
  conv.case_id = "C1";
  conv.task = "short_vqa";
  conv.language = "en";
  conv.turns = {{"user", "q"}, {"assistant", "a"}};
  conv.provenance = {"model-x", "short_vqa", "1970-01-01T00:00:00Z", "gen:C1:short_vqa"};

  const Conversation back = conversation_from_json(conv.to_json());
  CHECK(back.conv_id == conv.conv_id);
  CHECK_FALSE(back.parent_id.has_value());
  CHECK(back.turns.size() == 2);
  CHECK(back.provenance.model_id == "model-x");

  conv.parent_id = "C1:short_vqa:root";
  CHECK(conversation_from_json(conv.to_json()).parent_id == conv.parent_id);
}

TEST_CASE("canonical sort orders by case, task, language") {
  ConversationSet set;
  for (const char* id : {"B:z:en", "A:z:nl", "A:z:en", "A:a:en"}) {
    Conversation conv;
    const auto first = std::string(id).find(':');
    const auto last = std::string(id).rfind(':');
    conv.conv_id = id;
    conv.case_id = std::string(id).substr(0, first);
    conv.task = std::string(id).substr(first + 1, last - first - 1);
    conv.language = std::string(id).substr(last + 1);
    set.conversations.push_back(conv);
  }
  set.sort_canonical();
  CHECK(set.conversations[0].conv_id == "A:a:en");
  CHECK(set.conversations[1].conv_id == "A:z:en");
  CHECK(set.conversations[2].conv_id == "A:z:nl");
  CHECK(set.conversations[3].conv_id == "B:z:en");
}
