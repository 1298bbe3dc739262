#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <vector>

#include <json.hpp>

#include "cofcot/error.hpp"

namespace cofcot {

struct CompletionRequest {
  std::string model;
  std::string prompt;
  double temperature = 0.0;
  int n = 1;
  int max_tokens = 512;
};

// n >= 1, temperature >= 0, max_tokens >= 1; throws InvalidArgument.
void validate_request(const CompletionRequest& req);

struct TokenUsage {
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
};

struct CompletionResponse {
  std::vector<std::string> completions;
  TokenUsage usage;
  std::chrono::milliseconds latency{0};
};

// The five request fields as a JSON object with keys in lexicographic order,
// dumped compactly: {"max_tokens":..,"model":..,"n":..,"prompt":..,"temperature":..}
std::string canonical_request(const CompletionRequest& req);
// Lowercase hex SHA-256 of canonical_request(req).
std::string replay_key(const CompletionRequest& req);
std::string sha256_hex(std::string_view data);

class Backend {
 public:
  virtual ~Backend() = default;
  // Implementations are safe to call from several threads at once.
  virtual CompletionResponse complete(const CompletionRequest& req) = 0;
};

// Replay archive: JSONL, first line {"format":"cofcot-replay","version":1},
// then one record per line:
//   {"key": <replay_key>, "request": {model, temperature, n, max_tokens, prompt},
//    "completions": [...]}
// Records are only ever appended. On load a repeated key keeps its first record.
class ReplayArchive {
 public:
  static constexpr int kVersion = 1;

  ReplayArchive() = default;
  // Throws UnreadableFile / MalformedRecord.
  static std::shared_ptr<ReplayArchive> load(const std::string& path);

  // Opens (creating if needed) `path` for appending, writing the header when
  // the file is new or empty. Existing records are loaded. Throws WriteFailure.
  static std::shared_ptr<ReplayArchive> open_for_append(const std::string& path);

  const std::vector<std::string>* find(const std::string& key) const;
  // Appends to memory and, when opened for appending, to disk (flushed per
  // record). A key already present is not written again. Throws WriteFailure.
  void append(const CompletionRequest& req, const std::vector<std::string>& completions);

  std::size_t size() const;

 private:
  void read_from(const std::string& path);

  mutable std::mutex mu_;
  std::map<std::string, std::vector<std::string>> records_;
  std::string append_path_;
};

class ReplayBackend : public Backend {
 public:
  explicit ReplayBackend(std::shared_ptr<const ReplayArchive> archive) : archive_(std::move(archive)) {}
  // Throws ReplayMiss when the request was never recorded.
  CompletionResponse complete(const CompletionRequest& req) override;

 private:
  std::shared_ptr<const ReplayArchive> archive_;
};

// Serves from the archive when it already holds the key, otherwise forwards
// to `inner` and persists the answer.
class RecordingBackend : public Backend {
 public:
  RecordingBackend(std::shared_ptr<Backend> inner, std::shared_ptr<ReplayArchive> archive)
      : inner_(std::move(inner)), archive_(std::move(archive)) {}
  CompletionResponse complete(const CompletionRequest& req) override;

 private:
  std::shared_ptr<Backend> inner_;
  std::shared_ptr<ReplayArchive> archive_;
  std::mutex record_mu_;
};

// Test double. The responder gets each request and returns completions; if
// it returns fewer than req.n they are cycled up to n. Every request is kept.
class MockBackend : public Backend {
 public:
  using Responder = std::function<std::vector<std::string>(const CompletionRequest&)>;

  explicit MockBackend(Responder responder) : responder_(std::move(responder)) {}

  // Answers the i-th call with answers[i]; calls past the end throw BackendError.
  static std::shared_ptr<MockBackend> scripted(std::vector<std::vector<std::string>> answers);
  // First rule whose needle occurs in the prompt wins; no match throws BackendError.
  static std::shared_ptr<MockBackend> rules(std::vector<std::pair<std::string, std::vector<std::string>>> rules);

  CompletionResponse complete(const CompletionRequest& req) override;
  std::vector<CompletionRequest> requests() const;

 private:
  Responder responder_;
  mutable std::mutex mu_;
  std::vector<CompletionRequest> requests_;
};

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{8000};
};

// Delays slept between attempts: max_attempts - 1 entries, each capped at
// max_backoff, so the total is bounded by (max_attempts - 1) * max_backoff.
std::vector<std::chrono::milliseconds> backoff_schedule(const RetryPolicy& p);

// Token bucket over an injectable clock. reserve() takes one token and
// returns how long the caller must wait before using it.
class TokenBucket {
 public:
  using Clock = std::chrono::steady_clock;

  TokenBucket(double tokens_per_second, double capacity);
  std::chrono::nanoseconds reserve(Clock::time_point now);
  void acquire();

 private:
  std::mutex mu_;
  double rate_;
  double capacity_;
  double tokens_;
  Clock::time_point last_{};
  bool started_ = false;
};

struct HttpReply {
  int status = 0;  // 0: transport failure
  std::string body;
  std::string error;
};

struct HttpConfig {
  std::string base_url;  // e.g. https://api.openai.com/v1
  std::string api_key;
  RetryPolicy retry;
  double requests_per_second = 3.0;
  double burst = 3.0;
  int max_in_flight = 4;
  int timeout_seconds = 120;
};

// base_url and api_key from LLM_BASE_URL / LLM_API_KEY. A missing key throws
// AuthFailure; a missing base URL defaults to https://api.openai.com/v1.
HttpConfig http_config_from_env();

// OpenAI-style chat completion client: POST <base_url>/chat/completions with
// {model, messages:[{role:user, content:prompt}], temperature, n, max_tokens}.
class HttpBackend : public Backend {
 public:
  using Transport = std::function<HttpReply(const std::string& url, const std::string& body,
                                            const std::string& api_key, int timeout_seconds)>;
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit HttpBackend(HttpConfig config);
  // For tests: fake wire and no real sleeping.
  HttpBackend(HttpConfig config, Transport transport, Sleeper sleeper);

  CompletionResponse complete(const CompletionRequest& req) override;

  static std::string request_body(const CompletionRequest& req);
  // Throws MalformedResponse.
  static CompletionResponse parse_response(const std::string& body, int expected_n);

 private:
  HttpConfig config_;
  Transport transport_;
  Sleeper sleeper_;
  TokenBucket bucket_;
  std::counting_semaphore<1024> in_flight_;
};

}  // namespace cofcot
