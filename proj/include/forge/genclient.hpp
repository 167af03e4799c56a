// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "forge/io.hpp"

namespace forge {

struct VlmRequest {
  std::string model_id;
  std::string prompt;
  std::string image;  // raw bytes
  std::string media_type = "image/png";
  int max_tokens = 1024;
  double temperature = 0.0;
};

// Temperatures used by the pipeline's callers.
inline constexpr double kAnnotationTemperature = 0.0;
inline constexpr double kAugmentTemperature = 0.0;
inline constexpr double kMiningTemperature = 0.7;

// Hex SHA-256 over (model_id, prompt, image bytes, temperature, max_tokens).
std::string cache_key(const VlmRequest& request);
std::string request_id_for(const std::string& key);

std::string media_type_for(const std::filesystem::path& image_path);

struct VlmResponse {
  std::string text;
  std::string request_id;
  bool from_cache = false;
};

enum class UpstreamStatus { kOk, kThrottled, kError, kTimeout };

struct UpstreamReply {
  UpstreamStatus status = UpstreamStatus::kOk;
  std::string text;
  int http_status = 200;
};

class VlmBackend {
 public:
  virtual ~VlmBackend() = default;
  virtual UpstreamReply call(const VlmRequest& request, const std::string& key) = 0;
};

// Scripted backend. Rules are tried in order; the first whose conditions all
// hold (and whose `times` budget is not spent) answers. Script file:
//   {"latency_ms": 0,
//    "default": "optional fallback text",
//    "rules": [{"prompt_contains": ["Rephrase"], "image_sha256": "...", "key": "...",
//               "response": "Q1: ...\nA1: ...", "status": 200, "times": 3}]}
// status 429/503 throttle, 408/504 time out, any other non-200 is an error.
struct MockRule {
  std::vector<std::string> prompt_contains;
  std::optional<std::string> image_sha256;
  std::optional<std::string> key;
  std::string response;
  int status = 200;
  std::optional<int> times;
};

struct MockScript {
  std::vector<MockRule> rules;
  std::optional<std::string> default_response;
  int latency_ms = 0;
};

MockScript parse_mock_script(const Json& doc);
Json to_json(const MockScript& script);

class MockVlmBackend : public VlmBackend {
 public:
  struct CallRecord {
    std::string key;
    std::string prompt;
    std::string image_sha256;
    std::size_t in_flight_at_start = 0;
  };

  explicit MockVlmBackend(MockScript script);
  static std::shared_ptr<MockVlmBackend> from_file(const std::filesystem::path& path);

  UpstreamReply call(const VlmRequest& request, const std::string& key) override;

  std::vector<CallRecord> calls() const;
  std::size_t call_count() const;
  std::size_t max_in_flight() const;

 private:
  MockScript script_;
  std::vector<int> used_;
  mutable std::mutex mu_;
  std::vector<CallRecord> log_;
  std::size_t in_flight_ = 0;
  std::size_t max_in_flight_ = 0;
};

// OpenAI-style chat-completions endpoint: one user message holding the text
// prompt and the image as a base64 data URL.
class RemoteVlmBackend : public VlmBackend {
 public:
  RemoteVlmBackend(std::string endpoint_url, std::string api_key,
                   std::chrono::seconds timeout = std::chrono::seconds(120));
  UpstreamReply call(const VlmRequest& request, const std::string& key) override;

  static Json build_body(const VlmRequest& request);

 private:
  std::string scheme_host_port_;
  std::string path_;
  std::string api_key_;
  std::chrono::seconds timeout_;
};

// "mock:<script.json>" or an http(s) URL. The API key is read from `api_key_env`.
std::shared_ptr<VlmBackend> make_vlm_backend(const std::string& spec,
                                             const std::string& api_key_env = "FORGE_API_KEY");

// Requests-per-minute token bucket. rpm <= 0 disables limiting.
class TokenBucket {
 public:
  using Clock = std::chrono::steady_clock;
  TokenBucket(double rpm, double burst = 1.0);
  void acquire();

 private:
  double rate_per_sec_;
  double capacity_;
  double tokens_;
  Clock::time_point last_;
  std::mutex mu_;
};

struct ClientOptions {
  std::filesystem::path cache_dir;  // empty keeps the cache in memory only
  double rpm = 0;
  std::size_t max_in_flight = 4;
  int max_attempts = 5;
  std::chrono::milliseconds backoff_base{1000};
  double backoff_factor = 2.0;
  // Injected so tests can observe the backoff schedule without waiting.
  std::function<void(std::chrono::milliseconds)> sleep;
};

// Thread-safe client: content-addressed cache, concurrency cap, RPM limiter
// and exponential backoff on throttling.
class VlmClient {
 public:
  VlmClient(std::shared_ptr<VlmBackend> backend, ClientOptions options = {});

  // Throws Error{kInvalidArgument} for an empty prompt or image, then
  // RateLimited / UpstreamError / Timeout when the upstream call fails.
  VlmResponse complete(const VlmRequest& request);

  // Text-only variant (no image part), used by answer extraction.
  VlmResponse complete_text(const std::string& model_id, const std::string& prompt,
                            int max_tokens = 256, double temperature = 0.0);

  std::size_t upstream_calls() const;
  std::size_t cache_hits() const;

 private:
  VlmResponse run(const VlmRequest& request);
  std::optional<std::string> cache_lookup(const std::string& key);
  void cache_store(const std::string& key, const VlmRequest& request, const std::string& text);
  VlmResponse call_upstream(const VlmRequest& request, const std::string& key);

  std::shared_ptr<VlmBackend> backend_;
  ClientOptions options_;
  TokenBucket bucket_;

  mutable std::mutex mu_;
  std::condition_variable slot_free_;
  std::size_t in_flight_ = 0;
  std::unordered_map<std::string, std::string> memory_cache_;
  std::map<std::string, std::shared_future<VlmResponse>> pending_;
  std::size_t upstream_calls_ = 0;
  std::size_t cache_hits_ = 0;
  std::mutex write_mu_;
};

}  // namespace forge
