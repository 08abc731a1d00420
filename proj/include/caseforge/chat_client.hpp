#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <condition_variable>
#include <string>
#include <vector>

#include <json.hpp>

#include "caseforge/errors.hpp"

namespace caseforge {

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;
};

struct ChatRequest {
  std::string model_id;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 2048;
  std::string request_tag;  // audit only, excluded from the content hash

  void validate() const;
  // Stable key over (model, messages, temperature, max_tokens); used by the
  // mock backend and the cassette store.
  std::string content_hash() const;
  nlohmann::json to_json() const;
};

enum class FinishReason { kStop, kLength, kError };

std::string finish_reason_to_string(FinishReason reason);
FinishReason finish_reason_from_string(const std::string& name);

struct ChatResponse {
  std::string content;
  FinishReason finish_reason = FinishReason::kStop;
  long latency_ms = 0;
  int attempt_count = 1;
};

// Raised by backends for failures worth retrying (HTTP 408/429/5xx and
// transport errors). Anything else propagates immediately.
class TransientBackendError : public Error {
 public:
  TransientBackendError(int http_status, const std::string& message)
      : Error("backend_transient", message), http_status_(http_status) {}
  int http_status() const noexcept { return http_status_; }  // 0 = transport

 private:
  int http_status_;
};

// A single completion attempt; retry, backoff and rate limiting live in
// ChatClient.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResponse complete_once(const ChatRequest& request) = 0;
  // Deterministic backends let the pipeline pin timestamps so reruns are
  // byte-identical.
  virtual bool deterministic() const { return false; }
};

// Counting semaphore with a high-water mark, so tests can assert the
// in-flight cap was honoured.
class RequestLimiter {
 public:
  explicit RequestLimiter(int limit);
  void acquire();
  void release();
  int peak() const;

  class Guard {
   public:
    explicit Guard(RequestLimiter& limiter) : limiter_(limiter) { limiter_.acquire(); }
    ~Guard() { limiter_.release(); }
    Guard(const Guard&) = delete;
    Guard& operator=(const Guard&) = delete;

   private:
    RequestLimiter& limiter_;
  };

 private:
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  int limit_;
  int in_flight_ = 0;
  int peak_ = 0;
};

struct RetryPolicy {
  int attempts = 5;
  long base_delay_ms = 1000;
  long max_delay_ms = 60000;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

class ChatClient {
 public:
  ChatClient(std::shared_ptr<ChatBackend> backend, RetryPolicy retry = {},
             std::shared_ptr<RequestLimiter> limiter = nullptr, Sleeper sleeper = nullptr);

  ChatResponse complete(const ChatRequest& request);

  const ChatBackend& backend() const { return *backend_; }
  bool deterministic() const { return backend_->deterministic(); }

 private:
  std::shared_ptr<ChatBackend> backend_;
  RetryPolicy retry_;
  std::shared_ptr<RequestLimiter> limiter_;
  Sleeper sleeper_;
};

// Adapts a lambda; handy for scripted tests and custom integrations.
class FunctionBackend : public ChatBackend {
 public:
  using Handler = std::function<ChatResponse(const ChatRequest&)>;
  explicit FunctionBackend(Handler handler, bool deterministic = true)
      : handler_(std::move(handler)), deterministic_(deterministic) {}

  ChatResponse complete_once(const ChatRequest& request) override { return handler_(request); }
  bool deterministic() const override { return deterministic_; }

 private:
  Handler handler_;
  bool deterministic_;
};

// Built-in deterministic backend. Responses are a pure function of the
// request; the request_tag prefix (gen:/tr:/judge:/divalt:/extract:) selects
// the response shape so the whole pipeline can run offline.
class MockBackend : public ChatBackend {
 public:
  ChatResponse complete_once(const ChatRequest& request) override;
  bool deterministic() const override { return true; }
};

// Speaks the standard chat-completions JSON wire shape: messages array in,
// choices[0].message.content out. Bearer token read from `api_key_env`.
class HttpBackend : public ChatBackend {
 public:
  HttpBackend(std::string url, std::string api_key_env, long timeout_ms = 60000);

  ChatResponse complete_once(const ChatRequest& request) override;

 private:
  std::string base_;
  std::string path_;
  std::string api_key_env_;
  long timeout_ms_;
};

enum class CassetteMode { kRecord, kReplay };

// Record/replay decorator. Record mode persists request-hash -> response as
// JSONL; replay mode never touches the network and fails loudly on a miss.
class CassetteBackend : public ChatBackend {
 public:
  CassetteBackend(std::filesystem::path store_path, CassetteMode mode,
                  std::shared_ptr<ChatBackend> inner = nullptr);

  ChatResponse complete_once(const ChatRequest& request) override;
  bool deterministic() const override { return mode_ == CassetteMode::kReplay; }
  size_t size() const;

 private:
  std::filesystem::path store_path_;
  CassetteMode mode_;
  std::shared_ptr<ChatBackend> inner_;
  mutable std::mutex mutex_;
  std::map<std::string, ChatResponse> entries_;
};

// Pulls the block between `<<<NAME>>>` and `<<<END>>>` out of a rendered
// prompt. The bundled templates use these markers so the mock backend can
// echo payloads (translation text, diversification queries) back.
std::string extract_marker(const std::string& text, const std::string& name);

}  // namespace caseforge
