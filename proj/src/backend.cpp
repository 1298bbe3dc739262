#include "cofcot/backend.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include <openssl/evp.h>

#include "cofcot/text.hpp"

namespace cofcot {

using nlohmann::json;

void validate_request(const CompletionRequest& req) {
  if (req.n < 1) throw Error(ErrorKind::InvalidArgument, "n must be >= 1");
  if (!(req.temperature >= 0.0)) throw Error(ErrorKind::InvalidArgument, "temperature must be >= 0");
  if (req.max_tokens < 1) throw Error(ErrorKind::InvalidArgument, "max_tokens must be >= 1");
}

namespace {

json request_summary(const CompletionRequest& req) {
  // nlohmann::json objects are std::map backed, so dump() emits sorted keys.
  return {{"model", req.model},
          {"prompt", req.prompt},
          {"temperature", req.temperature},
          {"n", req.n},
          {"max_tokens", req.max_tokens}};
}

TokenUsage estimate_usage(const CompletionRequest& req, const std::vector<std::string>& completions) {
  TokenUsage u;
  u.prompt_tokens = text::split_ws(req.prompt).size();
  for (const auto& c : completions) u.completion_tokens += text::split_ws(c).size();
  return u;
}

}  // namespace

std::string canonical_request(const CompletionRequest& req) { return request_summary(req).dump(); }

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::BackendError, "SHA-256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xF];
  }
  return out;
}

std::string replay_key(const CompletionRequest& req) { return sha256_hex(canonical_request(req)); }

// ---------------------------------------------------------------------------
// Replay archive

void ReplayArchive::read_from(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::UnreadableFile, "cannot open replay archive '" + path + "'");
  std::string raw;
  std::size_t line = 0;
  bool header = false;
  while (std::getline(in, raw)) {
    ++line;
    if (text::trim(raw).empty()) continue;
    json j;
    try {
      j = json::parse(raw);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::MalformedRecord, path + " line " + std::to_string(line) + ": " + e.what());
    }
    if (!header) {
      if (j.value("format", "") != "cofcot-replay") {
        throw Error(ErrorKind::MalformedRecord, path + ": missing replay archive header");
      }
      if (j.value("version", 0) != kVersion) {
        throw Error(ErrorKind::MalformedRecord, path + ": unsupported archive version " + j.value("version", json()).dump());
      }
      header = true;
      continue;
    }
    try {
      const std::string key = j.at("key").get<std::string>();
      records_.emplace(key, j.at("completions").get<std::vector<std::string>>());
    } catch (const json::exception& e) {
      throw Error(ErrorKind::MalformedRecord, path + " line " + std::to_string(line) + ": " + e.what());
    }
  }
  if (!header) throw Error(ErrorKind::MalformedRecord, path + ": empty file, expected archive header");
}

std::shared_ptr<ReplayArchive> ReplayArchive::load(const std::string& path) {
  auto archive = std::make_shared<ReplayArchive>();
  archive->read_from(path);
  return archive;
}

std::shared_ptr<ReplayArchive> ReplayArchive::open_for_append(const std::string& path) {
  auto archive = std::make_shared<ReplayArchive>();
  std::error_code ec;
  if (std::filesystem::exists(path, ec) && std::filesystem::file_size(path, ec) > 0) {
    archive->read_from(path);
  } else {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << json{{"format", "cofcot-replay"}, {"version", kVersion}}.dump() << '\n';
    if (!out.flush()) throw Error(ErrorKind::WriteFailure, "cannot write replay archive '" + path + "'");
  }
  archive->append_path_ = path;
  return archive;
}

const std::vector<std::string>* ReplayArchive::find(const std::string& key) const {
  std::lock_guard lock(mu_);
  const auto it = records_.find(key);
  return it == records_.end() ? nullptr : &it->second;
}

void ReplayArchive::append(const CompletionRequest& req, const std::vector<std::string>& completions) {
  const std::string key = replay_key(req);
  std::lock_guard lock(mu_);
  if (records_.count(key)) return;
  if (!append_path_.empty()) {
    std::ofstream out(append_path_, std::ios::binary | std::ios::app);
    out << json{{"key", key}, {"request", request_summary(req)}, {"completions", completions}}.dump() << '\n';
    if (!out.flush()) throw Error(ErrorKind::WriteFailure, "cannot append to replay archive '" + append_path_ + "'");
  }
  records_.emplace(key, completions);
}

std::size_t ReplayArchive::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

CompletionResponse ReplayBackend::complete(const CompletionRequest& req) {
  validate_request(req);
  const std::string key = replay_key(req);
  const auto* hit = archive_->find(key);
  if (!hit) throw Error(ErrorKind::ReplayMiss, "no recorded response for request " + key.substr(0, 16));
  CompletionResponse r;
  r.completions = *hit;
  r.usage = estimate_usage(req, r.completions);
  return r;
}

CompletionResponse RecordingBackend::complete(const CompletionRequest& req) {
  validate_request(req);
  if (const auto* hit = archive_->find(replay_key(req))) {
    CompletionResponse r;
    r.completions = *hit;
    r.usage = estimate_usage(req, r.completions);
    return r;
  }
  CompletionResponse r = inner_->complete(req);
  // Two workers may race on the same key; the archive keeps the first write
  // and both callers must see what was stored.
  std::lock_guard lock(record_mu_);
  archive_->append(req, r.completions);
  r.completions = *archive_->find(replay_key(req));
  return r;
}

// ---------------------------------------------------------------------------
// Mock

std::shared_ptr<MockBackend> MockBackend::scripted(std::vector<std::vector<std::string>> answers) {
  auto next = std::make_shared<std::size_t>(0);
  auto script = std::make_shared<std::vector<std::vector<std::string>>>(std::move(answers));
  auto mu = std::make_shared<std::mutex>();
  return std::make_shared<MockBackend>([next, script, mu](const CompletionRequest&) {
    std::lock_guard lock(*mu);
    if (*next >= script->size()) throw Error(ErrorKind::BackendError, "mock script exhausted");
    return (*script)[(*next)++];
  });
}

std::shared_ptr<MockBackend> MockBackend::rules(std::vector<std::pair<std::string, std::vector<std::string>>> rules) {
  return std::make_shared<MockBackend>([rules = std::move(rules)](const CompletionRequest& req) {
    for (const auto& [needle, answers] : rules) {
      if (text::contains(req.prompt, needle)) return answers;
    }
    throw Error(ErrorKind::BackendError, "no mock rule matches the prompt");
  });
}

CompletionResponse MockBackend::complete(const CompletionRequest& req) {
  validate_request(req);
  {
    std::lock_guard lock(mu_);
    requests_.push_back(req);
  }
  std::vector<std::string> answers = responder_(req);
  if (answers.empty()) throw Error(ErrorKind::MalformedResponse, "mock returned no completions");
  CompletionResponse r;
  for (int i = 0; i < req.n; ++i) r.completions.push_back(answers[i % answers.size()]);
  r.usage = estimate_usage(req, r.completions);
  return r;
}

std::vector<CompletionRequest> MockBackend::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

// ---------------------------------------------------------------------------
// Rate limiting and retries

std::vector<std::chrono::milliseconds> backoff_schedule(const RetryPolicy& p) {
  std::vector<std::chrono::milliseconds> out;
  double delay = static_cast<double>(p.initial_backoff.count());
  for (int i = 1; i < p.max_attempts; ++i) {
    const double capped = std::min(delay, static_cast<double>(p.max_backoff.count()));
    out.emplace_back(static_cast<long long>(capped));
    delay *= p.multiplier;
  }
  return out;
}

TokenBucket::TokenBucket(double tokens_per_second, double capacity)
    : rate_(tokens_per_second), capacity_(std::max(1.0, capacity)), tokens_(std::max(1.0, capacity)) {}

std::chrono::nanoseconds TokenBucket::reserve(Clock::time_point now) {
  std::lock_guard lock(mu_);
  if (rate_ <= 0.0) return std::chrono::nanoseconds(0);
  if (!started_) {
    started_ = true;
    last_ = now;
  }
  if (now > last_) {
    const double elapsed = std::chrono::duration<double>(now - last_).count();
    tokens_ = std::min(capacity_, tokens_ + elapsed * rate_);
    last_ = now;
  }
  tokens_ -= 1.0;
  if (tokens_ >= 0.0) return std::chrono::nanoseconds(0);
  // Negative balance: this caller waits until the deficit refills.
  return std::chrono::nanoseconds(static_cast<long long>(std::ceil(-tokens_ / rate_ * 1e9)));
}

void TokenBucket::acquire() {
  const auto wait = reserve(Clock::now());
  if (wait.count() > 0) std::this_thread::sleep_for(wait);
}

}  // namespace cofcot
