#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>
#include <thread>

#include "cofcot/backend.hpp"

namespace cofcot {

using nlohmann::json;

namespace {

HttpReply httplib_post(const std::string& url, const std::string& body, const std::string& api_key,
                       int timeout_seconds) {
  // "https://host[:port]/prefix/chat/completions" -> client origin + path.
  const std::size_t scheme_end = url.find("://");
  const std::size_t path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  const std::string origin = url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

  httplib::Client client(origin);
  client.set_connection_timeout(timeout_seconds, 0);
  client.set_read_timeout(timeout_seconds, 0);
  client.set_write_timeout(timeout_seconds, 0);
  const httplib::Headers headers = {{"Authorization", "Bearer " + api_key}};
  const auto res = client.Post(path, headers, body, "application/json");
  HttpReply reply;
  if (!res) {
    reply.error = httplib::to_string(res.error());
    return reply;
  }
  reply.status = res->status;
  reply.body = res->body;
  return reply;
}

bool transient(int status) { return status == 0 || status == 408 || status == 409 || status == 429 || status >= 500; }

}  // namespace

HttpConfig http_config_from_env() {
  HttpConfig cfg;
  const char* key = std::getenv("LLM_API_KEY");
  if (!key || !*key) throw Error(ErrorKind::AuthFailure, "LLM_API_KEY is not set");
  cfg.api_key = key;
  const char* base = std::getenv("LLM_BASE_URL");
  cfg.base_url = base && *base ? base : "https://api.openai.com/v1";
  while (!cfg.base_url.empty() && cfg.base_url.back() == '/') cfg.base_url.pop_back();
  return cfg;
}

HttpBackend::HttpBackend(HttpConfig config)
    : HttpBackend(std::move(config), httplib_post, [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {}

HttpBackend::HttpBackend(HttpConfig config, Transport transport, Sleeper sleeper)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      sleeper_(std::move(sleeper)),
      bucket_(config_.requests_per_second, config_.burst),
      in_flight_(std::max(1, std::min(config_.max_in_flight, 1024))) {}

std::string HttpBackend::request_body(const CompletionRequest& req) {
  // The prompt goes on the wire untouched.
  return json{{"model", req.model},
              {"messages", json::array({{{"role", "user"}, {"content", req.prompt}}})},
              {"temperature", req.temperature},
              {"n", req.n},
              {"max_tokens", req.max_tokens}}
      .dump();
}

CompletionResponse HttpBackend::parse_response(const std::string& body, int expected_n) {
  CompletionResponse r;
  try {
    const json j = json::parse(body);
    const auto& choices = j.at("choices");
    // Choices carry an index; order by it in case the server does not.
    std::vector<std::pair<int, std::string>> indexed;
    for (const auto& c : choices) {
      indexed.emplace_back(c.value("index", static_cast<int>(indexed.size())),
                           c.at("message").at("content").get<std::string>());
    }
    std::stable_sort(indexed.begin(), indexed.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [_, content] : indexed) r.completions.push_back(std::move(content));
    if (j.contains("usage") && j["usage"].is_object()) {
      r.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0);
      r.usage.completion_tokens = j["usage"].value("completion_tokens", 0);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MalformedResponse, std::string("chat completion body: ") + e.what());
  }
  if (static_cast<int>(r.completions.size()) != expected_n) {
    throw Error(ErrorKind::MalformedResponse, "expected " + std::to_string(expected_n) + " completions, got " +
                                                  std::to_string(r.completions.size()));
  }
  return r;
}

CompletionResponse HttpBackend::complete(const CompletionRequest& req) {
  validate_request(req);
  const std::string url = config_.base_url + "/chat/completions";
  const std::string body = request_body(req);
  const auto delays = backoff_schedule(config_.retry);

  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{in_flight_};

  HttpReply last;
  for (int attempt = 0; attempt < std::max(1, config_.retry.max_attempts); ++attempt) {
    if (attempt > 0) sleeper_(delays[attempt - 1]);
    bucket_.acquire();
    const auto start = std::chrono::steady_clock::now();
    last = transport_(url, body, config_.api_key, config_.timeout_seconds);
    if (last.status == 200) {
      CompletionResponse r = parse_response(last.body, req.n);
      r.latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
      return r;
    }
    if (last.status == 401 || last.status == 403) {
      throw Error(ErrorKind::AuthFailure, "HTTP " + std::to_string(last.status) + " from " + url);
    }
    if (!transient(last.status)) break;
  }
  if (last.status == 429) {
    throw Error(ErrorKind::RateLimited,
                "HTTP 429 after " + std::to_string(config_.retry.max_attempts) + " attempts");
  }
  throw Error(ErrorKind::BackendError, last.status == 0 ? "transport failure: " + last.error
                                                        : "HTTP " + std::to_string(last.status) + ": " +
                                                              last.body.substr(0, 200));
}

}  // namespace cofcot
