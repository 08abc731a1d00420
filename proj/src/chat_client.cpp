#include "caseforge/chat_client.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "caseforge/hash.hpp"
#include "caseforge/jsonl.hpp"
#include "caseforge/rng.hpp"
#include "caseforge/strings.hpp"

namespace caseforge {

using nlohmann::json;

void ChatRequest::validate() const {
  if (messages.empty()) fail("request", "chat request has no messages");
  if (temperature < 0) fail("request", "temperature must be >= 0");
  if (max_tokens <= 0) fail("request", "max_tokens must be positive");
  bool saw_non_system = false;
  for (const auto& message : messages) {
    if (message.role != "system" && message.role != "user" && message.role != "assistant") {
      fail("request", "unknown message role '" + message.role + "'");
    }
    if (!saw_non_system && message.role != "system") {
      saw_non_system = true;
      if (message.role != "user") {
        fail("request", "first non-system message must have role 'user'");
      }
    }
  }
  if (!saw_non_system) fail("request", "chat request has only system messages");
}

json ChatRequest::to_json() const {
  json messages_json = json::array();
  for (const auto& message : messages) {
    messages_json.push_back({{"role", message.role}, {"content", message.content}});
  }
  return {{"model", model_id},
          {"messages", messages_json},
          {"temperature", temperature},
          {"max_tokens", max_tokens}};
}

std::string ChatRequest::content_hash() const {
  return hex16(fnv1a64(to_json().dump()));
}

std::string finish_reason_to_string(FinishReason reason) {
  switch (reason) {
    case FinishReason::kStop: return "stop";
    case FinishReason::kLength: return "length";
    case FinishReason::kError: return "error";
  }
  return "error";
}

FinishReason finish_reason_from_string(const std::string& name) {
  if (name == "stop") return FinishReason::kStop;
  if (name == "length") return FinishReason::kLength;
  return FinishReason::kError;
}

RequestLimiter::RequestLimiter(int limit) : limit_(limit > 0 ? limit : 1) {}

void RequestLimiter::acquire() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [this] { return in_flight_ < limit_; });
  ++in_flight_;
  if (in_flight_ > peak_) peak_ = in_flight_;
}

void RequestLimiter::release() {
  {
    std::lock_guard lock(mutex_);
    --in_flight_;
  }
  cv_.notify_one();
}

int RequestLimiter::peak() const {
  std::lock_guard lock(mutex_);
  return peak_;
}

ChatClient::ChatClient(std::shared_ptr<ChatBackend> backend, RetryPolicy retry,
                       std::shared_ptr<RequestLimiter> limiter, Sleeper sleeper)
    : backend_(std::move(backend)),
      retry_(retry),
      limiter_(std::move(limiter)),
      sleeper_(std::move(sleeper)) {
  if (!sleeper_) {
    sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

ChatResponse ChatClient::complete(const ChatRequest& request) {
  request.validate();
  const int attempts = retry_.attempts > 0 ? retry_.attempts : 1;
  const std::uint64_t jitter_seed =
      derive_seed(fnv1a64(request.content_hash()), {"backoff", request.request_tag});

  std::unique_ptr<RequestLimiter::Guard> guard;
  if (limiter_) guard = std::make_unique<RequestLimiter::Guard>(*limiter_);

  const auto start = std::chrono::steady_clock::now();
  for (int attempt = 1;; ++attempt) {
    try {
      ChatResponse response = backend_->complete_once(request);
      response.attempt_count = attempt;
      response.latency_ms = static_cast<long>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                                  std::chrono::steady_clock::now() - start)
                                                  .count());
      // Content may be empty only with an error finish reason.
      if (response.content.empty() && response.finish_reason != FinishReason::kError) {
        response.finish_reason = FinishReason::kError;
      }
      return response;
    } catch (const TransientBackendError& error) {
      if (attempt >= attempts) {
        fail("backend_exhausted",
             "request '" + request.request_tag + "' failed after " + std::to_string(attempt) +
                 " attempts (last HTTP status " + std::to_string(error.http_status()) +
                 "): " + error.what());
      }
      // Exponential backoff with deterministic jitter in [0.5, 1.0).
      long delay = retry_.base_delay_ms;
      for (int i = 1; i < attempt && delay < retry_.max_delay_ms; ++i) delay *= 2;
      if (delay > retry_.max_delay_ms) delay = retry_.max_delay_ms;
      Rng rng(derive_seed(jitter_seed, {std::to_string(attempt)}));
      delay = static_cast<long>(static_cast<double>(delay) * (0.5 + 0.5 * rng.uniform()));
      sleeper_(std::chrono::milliseconds(delay));
    }
  }
}

// ---------------------------------------------------------------------------
// MockBackend

namespace {

std::string short_hash(const std::string& s) { return hex16(fnv1a64(s)).substr(0, 8); }

std::string last_user_content(const ChatRequest& request) {
  for (auto it = request.messages.rbegin(); it != request.messages.rend(); ++it) {
    if (it->role == "user") return it->content;
  }
  return request.messages.back().content;
}

json turn(const std::string& role, const std::string& content) {
  return {{"role", role}, {"content", content}};
}

std::string mock_generation(const std::string& case_id, const std::string& task,
                            const std::string& prompt) {
  const std::string h = short_hash(prompt);
  const std::string findings =
      "monomorphic cells with finding-" + h + " arranged around case " + case_id;

  if (task == "detailed_description") {
    // Bare text exercises the single-turn parse path.
    return "The slide shows " + findings + ", with preserved architecture and no necrosis.";
  }
  if (task == "clean_report") {
    return "Microscopy: " + findings + ".\nDiagnosis: consistent with the submitted material.";
  }

  json turns = json::array();
  if (task == "short_vqa") {
    turns.push_back(turn("user", "Which organ or tissue is shown?"));
    turns.push_back(turn("assistant", "Tissue consistent with sample " + h + "."));
    turns.push_back(turn("user", "Is a neoplasm present?"));
    turns.push_back(turn("assistant", "Yes."));
  } else if (task == "multi_turn") {
    turns.push_back(turn("user", "What do you see at low power?"));
    turns.push_back(turn("assistant", "At low power there are " + findings + "."));
    turns.push_back(turn("user", "And at high power?"));
    turns.push_back(turn("assistant", "High power confirms the impression (" + h + ")."));
  } else if (task == "differential_diagnosis") {
    turns.push_back(turn("user", "Which differential diagnoses should be considered?"));
    turns.push_back(turn("assistant",
                         "Based on " + findings + ", the leading consideration is lesion-" + h +
                             "; mimics are excluded by the bland cytology."));
  } else if (task == "negative_reasoning") {
    turns.push_back(turn("user", "What is the mutation status of this lesion?"));
    turns.push_back(turn("assistant",
                         "That cannot be determined from morphology alone; the slide shows " +
                             findings + " but no molecular information."));
  } else {  // advanced_reasoning and any future category
    turns.push_back(turn("user", "Describe the slide."));
    turns.push_back(turn("assistant",
                         "The sections show " + findings +
                             ", which implies a benign process given the uniform nuclei."));
  }
  return turns.dump();
}

std::string mock_judge_verdict() {
  json verdict = {
      {"step-by-step-reasoning",
       "The assistant stays on microscopic findings and mirrors the source facts."},
      {"evaluation_scores",
       {{"constraint_adherence",
         {{"score", 1}, {"justification", "Adherent; response is purely microscopic."}}},
        {"factual_groundedness_and_accuracy",
         {{"score", 5}, {"justification", "Fully grounded in the source report."}}},
        {"reasoning_clarity",
         {{"score", 3}, {"justification", "Clear logical flow."}}}}}};
  return verdict.dump();
}

std::string mock_alternatives(const std::string& prompt) {
  const std::string query = extract_marker(prompt, "QUERY");
  int count = 20;
  const std::string count_text = extract_marker(prompt, "COUNT");
  if (!count_text.empty()) count = std::max(1, std::atoi(count_text.c_str()));
  json alternatives = json::array();
  for (int i = 1; i <= count; ++i) {
    alternatives.push_back(query.empty()
                               ? "Alternative phrasing " + std::to_string(i)
                               : query + " (phrasing " + std::to_string(i) + ")");
  }
  return alternatives.dump();
}

}  // namespace

std::string extract_marker(const std::string& text, const std::string& name) {
  const std::string open = "<<<" + name + ">>>";
  const size_t begin = text.find(open);
  if (begin == std::string::npos) return "";
  const size_t payload = begin + open.size();
  const size_t end = text.find("<<<END>>>", payload);
  if (end == std::string::npos) return "";
  return strings::trim(text.substr(payload, end - payload));
}

ChatResponse MockBackend::complete_once(const ChatRequest& request) {
  const std::string& tag = request.request_tag;
  const std::string prompt = last_user_content(request);
  ChatResponse response;
  response.finish_reason = FinishReason::kStop;

  // Tag fields are read from the end: embedded ids may contain ':' themselves.
  if (tag.rfind("gen:", 0) == 0) {
    const auto parts = strings::split(tag, ':');
    const std::string task = parts.size() > 2 ? parts.back() : "advanced_reasoning";
    std::string case_id = "unknown";
    if (parts.size() > 2) {
      case_id = parts[1];
      for (size_t i = 2; i + 1 < parts.size(); ++i) case_id += ":" + parts[i];
    }
    response.content = mock_generation(case_id, task, prompt);
  } else if (tag.rfind("tr:", 0) == 0) {
    const auto parts = strings::split(tag, ':');
    const std::string lang = parts.size() > 3 ? parts[parts.size() - 2] : "xx";
    const std::string payload = extract_marker(prompt, "TEXT");
    response.content =
        "[" + lang + "] " + (payload.empty() ? "(" + short_hash(prompt) + ")" : payload);
  } else if (tag.rfind("judge:", 0) == 0) {
    response.content = mock_judge_verdict();
  } else if (tag.rfind("divalt:", 0) == 0) {
    response.content = mock_alternatives(prompt);
  } else if (tag.rfind("extract:", 0) == 0) {
    const std::string options = extract_marker(prompt, "OPTIONS");
    response.content = strings::split(options, '\n').front();
  } else {
    response.content = "ok (" + short_hash(prompt) + ")";
  }
  return response;
}

// ---------------------------------------------------------------------------
// HttpBackend

HttpBackend::HttpBackend(std::string url, std::string api_key_env, long timeout_ms)
    : api_key_env_(std::move(api_key_env)), timeout_ms_(timeout_ms) {
  const size_t scheme = url.find("://");
  if (scheme == std::string::npos) fail("config", "backend url must include a scheme: " + url);
  const size_t path_start = url.find('/', scheme + 3);
  if (path_start == std::string::npos) {
    base_ = url;
    path_ = "/v1/chat/completions";
  } else {
    base_ = url.substr(0, path_start);
    path_ = url.substr(path_start);
  }
}

ChatResponse HttpBackend::complete_once(const ChatRequest& request) {
  httplib::Client client(base_);
  client.set_connection_timeout(timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000);
  client.set_read_timeout(timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000);

  httplib::Headers headers;
  if (!api_key_env_.empty()) {
    if (const char* key = std::getenv(api_key_env_.c_str()); key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }

  auto result = client.Post(path_, headers, request.to_json().dump(), "application/json");
  if (!result) {
    throw TransientBackendError(0, "transport error: " + httplib::to_string(result.error()));
  }
  if (result->status == 408 || result->status == 429 || result->status >= 500) {
    throw TransientBackendError(result->status,
                                "HTTP " + std::to_string(result->status) + " from " + base_);
  }
  if (result->status >= 400) {
    fail("backend_http", "HTTP " + std::to_string(result->status) + " from " + base_ + ": " +
                             result->body.substr(0, 200));
  }

  json payload = json::parse(result->body, nullptr, false);
  if (payload.is_discarded()) fail("backend_http", "response from " + base_ + " is not JSON");
  ChatResponse response;
  try {
    const json& choice = payload.at("choices").at(0);
    response.content = choice.at("message").at("content").get<std::string>();
    response.finish_reason = finish_reason_from_string(choice.value("finish_reason", "stop"));
  } catch (const json::exception& ex) {
    fail("backend_http", std::string("unexpected chat-completions shape: ") + ex.what());
  }
  return response;
}

// ---------------------------------------------------------------------------
// CassetteBackend

CassetteBackend::CassetteBackend(std::filesystem::path store_path, CassetteMode mode,
                                 std::shared_ptr<ChatBackend> inner)
    : store_path_(std::move(store_path)), mode_(mode), inner_(std::move(inner)) {
  if (mode_ == CassetteMode::kRecord && !inner_) {
    fail("config", "cassette record mode requires an inner backend");
  }
  if (std::filesystem::exists(store_path_)) {
    for (const json& row : jsonl::read_file(store_path_)) {
      ChatResponse response;
      response.content = row.at("response").at("content").get<std::string>();
      response.finish_reason =
          finish_reason_from_string(row.at("response").value("finish_reason", "stop"));
      entries_[row.at("request_hash").get<std::string>()] = response;
    }
  }
}

ChatResponse CassetteBackend::complete_once(const ChatRequest& request) {
  const std::string hash = request.content_hash();
  {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(hash);
    if (it != entries_.end()) return it->second;
  }
  if (mode_ == CassetteMode::kReplay) {
    fail("cassette_miss", "no cassette entry for request '" + request.request_tag + "' (hash " +
                              hash + ") in " + store_path_.string());
  }
  ChatResponse response = inner_->complete_once(request);
  {
    std::lock_guard lock(mutex_);
    entries_[hash] = response;
    json row = {{"request_hash", hash},
                {"request", request.to_json()},
                {"response",
                 {{"content", response.content},
                  {"finish_reason", finish_reason_to_string(response.finish_reason)}}}};
    row["request"]["request_tag"] = request.request_tag;
    jsonl::append_line(store_path_, row);
  }
  return response;
}

size_t CassetteBackend::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

}  // namespace caseforge
