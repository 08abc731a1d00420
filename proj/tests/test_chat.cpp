#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "caseforge/chat_client.hpp"
#include "caseforge/generate.hpp"

#include "test_support.hpp"

using namespace caseforge;

namespace {

ChatRequest simple_request(const std::string& content, const std::string& tag = "t") {
  ChatRequest request;
  request.model_id = "m";
  request.messages.push_back({"user", content});
  request.request_tag = tag;
  return request;
}

// Records sleeps instead of sleeping; this is the fake clock for retry tests.
struct SleepRecorder {
  std::vector<long> delays_ms;
  Sleeper sleeper() {
    return [this](std::chrono::milliseconds d) { delays_ms.push_back(d.count()); };
  }
};

}  // namespace

TEST_CASE("request validation") {
  ChatRequest request;
  request.model_id = "m";
  CHECK_THROWS_AS(request.validate(), Error);  // no messages

  request.messages.push_back({"assistant", "hi"});
  CHECK_THROWS_AS(request.validate(), Error);  // first non-system must be user

  request.messages.clear();
  request.messages.push_back({"system", "s"});
  CHECK_THROWS_AS(request.validate(), Error);  // only system turns

  request.messages.push_back({"user", "q"});
  CHECK_NOTHROW(request.validate());

  request.temperature = -1;
  CHECK_THROWS_AS(request.validate(), Error);
}

TEST_CASE("content hash ignores the audit tag") {
  ChatRequest a = simple_request("hello", "tag-one");
  ChatRequest b = simple_request("hello", "tag-two");
  ChatRequest c = simple_request("other", "tag-one");
  CHECK(a.content_hash() == b.content_hash());
  CHECK(a.content_hash() != c.content_hash());
}

TEST_CASE("mock backend is deterministic") {
  MockBackend mock;
  const ChatRequest request = simple_request("prompt body", "gen:C1:short_vqa");
  CHECK(mock.complete_once(request).content == mock.complete_once(request).content);

  // Different cases produce different assistant content.
  const auto r1 = mock.complete_once(simple_request("body one", "gen:C1:multi_turn"));
  const auto r2 = mock.complete_once(simple_request("body two", "gen:C2:multi_turn"));
  CHECK(r1.content != r2.content);
}

TEST_CASE("retry: fails twice then succeeds within the attempt cap") {
  std::atomic<int> calls{0};
  auto backend = std::make_shared<FunctionBackend>([&](const ChatRequest&) -> ChatResponse {
    if (++calls <= 2) throw TransientBackendError(503, "unavailable");
    return {"ok", FinishReason::kStop, 0, 1};
  });
  SleepRecorder sleeps;
  ChatClient client(backend, RetryPolicy{3, 1000, 60000}, nullptr, sleeps.sleeper());

  const ChatResponse response = client.complete(simple_request("q"));
  CHECK(response.content == "ok");
  CHECK(response.attempt_count == 3);
  CHECK(calls == 3);

  // Exponential backoff with jitter in [0.5, 1.0) of the nominal delay.
  REQUIRE(sleeps.delays_ms.size() == 2);
  CHECK(sleeps.delays_ms[0] >= 500);
  CHECK(sleeps.delays_ms[0] < 1000);
  CHECK(sleeps.delays_ms[1] >= 1000);
  CHECK(sleeps.delays_ms[1] < 2000);
}

TEST_CASE("retry: exhaustion surfaces the last HTTP status") {
  auto backend = std::make_shared<FunctionBackend>(
      [](const ChatRequest&) -> ChatResponse { throw TransientBackendError(429, "rate limited"); });
  SleepRecorder sleeps;
  ChatClient client(backend, RetryPolicy{2, 10, 100}, nullptr, sleeps.sleeper());
  try {
    client.complete(simple_request("q", "tagged"));
    FAIL("expected exhaustion");
  } catch (const Error& error) {
    CHECK(error.code() == "backend_exhausted");
    const std::string what = error.what();
    CHECK(what.find("429") != std::string::npos);
    CHECK(what.find("tagged") != std::string::npos);
  }
  CHECK(sleeps.delays_ms.size() == 1);
}

TEST_CASE("backoff delay caps at max_delay_ms") {
  std::atomic<int> calls{0};
  auto backend = std::make_shared<FunctionBackend>([&](const ChatRequest&) -> ChatResponse {
    if (++calls <= 5) throw TransientBackendError(500, "boom");
    return {"ok", FinishReason::kStop, 0, 1};
  });
  SleepRecorder sleeps;
  ChatClient client(backend, RetryPolicy{6, 1000, 3000}, nullptr, sleeps.sleeper());
  client.complete(simple_request("q"));
  for (const long delay : sleeps.delays_ms) CHECK(delay <= 3000);
}

TEST_CASE("non-transient backend errors are not retried") {
  std::atomic<int> calls{0};
  auto backend = std::make_shared<FunctionBackend>([&](const ChatRequest&) -> ChatResponse {
    ++calls;
    fail("backend_http", "HTTP 400 bad request");
  });
  ChatClient client(backend, RetryPolicy{5, 10, 100}, nullptr, SleepRecorder{}.sleeper());
  CHECK_THROWS_AS(client.complete(simple_request("q")), Error);
  CHECK(calls == 1);
}

TEST_CASE("in-flight requests never exceed the limiter cap") {
  auto limiter = std::make_shared<RequestLimiter>(4);
  std::atomic<int> concurrent{0};
  std::atomic<int> observed_max{0};
  auto backend = std::make_shared<FunctionBackend>([&](const ChatRequest&) -> ChatResponse {
    const int now = ++concurrent;
    int expected = observed_max.load();
    while (now > expected && !observed_max.compare_exchange_weak(expected, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
    --concurrent;
    return {"ok", FinishReason::kStop, 0, 1};
  });
  ChatClient client(backend, RetryPolicy{1, 1, 1}, limiter);

  parallel_units(32, 16, [&](size_t i) {
    client.complete(simple_request("q" + std::to_string(i)));
  });
  CHECK(observed_max.load() <= 4);
  CHECK(limiter->peak() <= 4);
  CHECK(limiter->peak() >= 1);
}

TEST_CASE("cassette records then replays byte-identically") {
  testsup::TempDir dir;
  const auto store = dir.path() / "cassette.jsonl";

  ChatResponse first;
  {
    auto recorder = std::make_shared<CassetteBackend>(store, CassetteMode::kRecord,
                                                      std::make_shared<MockBackend>());
    first = recorder->complete_once(simple_request("hello", "gen:C1:short_vqa"));
    recorder->complete_once(simple_request("other", "judge:x"));
    CHECK(recorder->size() == 2);
  }

  CassetteBackend replayer(store, CassetteMode::kReplay);
  CHECK(replayer.size() == 2);
  const ChatResponse replayed = replayer.complete_once(simple_request("hello", "renamed-tag"));
  CHECK(replayed.content == first.content);

  try {
    replayer.complete_once(simple_request("never seen", "missing-tag"));
    FAIL("expected cassette miss");
  } catch (const Error& error) {
    CHECK(error.code() == "cassette_miss");
    CHECK(std::string(error.what()).find("missing-tag") != std::string::npos);
  }
}

TEST_CASE("cassette record mode requires an inner backend") {
  testsup::TempDir dir;
  CHECK_THROWS_AS(CassetteBackend(dir.path() / "c.jsonl", CassetteMode::kRecord), Error);
}

TEST_CASE("http backend speaks the chat-completions wire shape") {
  httplib::Server server;
  std::atomic<int> hits{0};
  std::string seen_auth;
  std::string seen_model;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    const int hit = ++hits;
    seen_auth = req.get_header_value("Authorization");
    auto body = nlohmann::json::parse(req.body);
    seen_model = body.at("model").get<std::string>();
    if (hit == 1) {
      res.status = 503;  // first attempt fails, client must retry
      res.set_content("busy", "text/plain");
      return;
    }
    nlohmann::json reply = {
        {"choices",
         {{{"message", {{"role", "assistant"}, {"content", "echo: " +
                         body.at("messages").at(0).at("content").get<std::string>()}}},
           {"finish_reason", "stop"}}}}};
    res.set_content(reply.dump(), "application/json");
  });

  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  setenv("CASEFORGE_TEST_KEY", "sekrit", 1);
  auto backend = std::make_shared<HttpBackend>(
      "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions", "CASEFORGE_TEST_KEY");
  SleepRecorder sleeps;
  ChatClient client(backend, RetryPolicy{3, 1, 10}, nullptr, sleeps.sleeper());

  const ChatResponse response = client.complete(simple_request("ping"));
  CHECK(response.content == "echo: ping");
  CHECK(response.attempt_count == 2);
  CHECK(seen_auth == "Bearer sekrit");
  CHECK(seen_model == "m");

  server.stop();
  server_thread.join();
}

TEST_CASE("http backend treats 4xx as permanent") {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 400;
    res.set_content("{\"error\":\"bad\"}", "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  auto backend = std::make_shared<HttpBackend>("http://127.0.0.1:" + std::to_string(port),
                                               "");
  ChatClient client(backend, RetryPolicy{5, 1, 10}, nullptr, SleepRecorder{}.sleeper());
  CHECK_THROWS_AS(client.complete(simple_request("q")), Error);
  CHECK(hits == 1);

  server.stop();
  server_thread.join();
}

TEST_CASE("marker extraction from rendered prompts") {
  const std::string text = "header\n<<<TEXT>>>\npayload line\n<<<END>>>\nfooter";
  CHECK(extract_marker(text, "TEXT") == "payload line");
  CHECK(extract_marker(text, "QUERY") == "");
  CHECK(extract_marker("<<<COUNT>>>20<<<END>>>", "COUNT") == "20");
}

TEST_CASE("a timed-out request is retried and surfaces as exhaustion") {
  httplib::Server server;
  server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(400));
    res.set_content("{}", "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  auto backend = std::make_shared<HttpBackend>("http://127.0.0.1:" + std::to_string(port),
                                               "", /*timeout_ms=*/100);
  ChatClient client(backend, RetryPolicy{2, 1, 10}, nullptr, SleepRecorder{}.sleeper());
  try {
    client.complete(simple_request("q", "slowpoke"));
    FAIL("expected exhaustion");
  } catch (const Error& error) {
    CHECK(error.code() == "backend_exhausted");
    CHECK(std::string(error.what()).find("slowpoke") != std::string::npos);
  }

  server.stop();
  server_thread.join();
}

TEST_CASE("empty content normalizes to an error finish reason") {
  auto backend = std::make_shared<FunctionBackend>(
      [](const ChatRequest&) { return ChatResponse{"", FinishReason::kStop, 0, 1}; });
  ChatClient client(backend);
  const ChatResponse response = client.complete(simple_request("q"));
  CHECK(response.content.empty());
  CHECK(response.finish_reason == FinishReason::kError);
}
