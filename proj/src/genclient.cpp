// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/genclient.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "forge/error.hpp"
#include "forge/hash.hpp"
#include "forge/text.hpp"

namespace forge {

std::string cache_key(const VlmRequest& r) {
  Sha256 h;
  h.update_field("forge-vlm-v1")
      .update_field(r.model_id)
      .update_field(r.prompt)
      .update_field(r.image)
      .update_field(format_number(r.temperature))
      .update_field(std::to_string(r.max_tokens));
  return to_hex(h.finish());
}

std::string request_id_for(const std::string& key) { return "req-" + key.substr(0, 24); }

std::string media_type_for(const std::filesystem::path& image_path) {
  auto ext = casefold(image_path.extension().string());
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".gif") return "image/gif";
  if (ext == ".webp") return "image/webp";
  if (ext == ".bmp") return "image/bmp";
  return "image/png";
}

// --- mock backend -------------------------------------------------------------

MockScript parse_mock_script(const Json& doc) {
  MockScript s;
  try {
    s.latency_ms = doc.value("latency_ms", 0);
    if (doc.contains("default") && !doc.at("default").is_null()) {
      s.default_response = doc.at("default").get<std::string>();
    }
    for (const auto& r : doc.value("rules", Json::array())) {
      MockRule rule;
      if (r.contains("prompt_contains")) {
        const auto& pc = r.at("prompt_contains");
        if (pc.is_string()) rule.prompt_contains.push_back(pc.get<std::string>());
        else rule.prompt_contains = pc.get<std::vector<std::string>>();
      }
      if (r.contains("image_sha256")) rule.image_sha256 = r.at("image_sha256").get<std::string>();
      if (r.contains("key")) rule.key = r.at("key").get<std::string>();
      rule.response = r.value("response", std::string());
      rule.status = r.value("status", 200);
      if (r.contains("times")) rule.times = r.at("times").get<int>();
      s.rules.push_back(std::move(rule));
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kConfigInvalid, std::string("bad mock script: ") + e.what());
  }
  return s;
}

Json to_json(const MockScript& s) {
  Json doc;
  doc["latency_ms"] = s.latency_ms;
  if (s.default_response) doc["default"] = *s.default_response;
  Json rules = Json::array();
  for (const auto& r : s.rules) {
    Json j;
    if (!r.prompt_contains.empty()) j["prompt_contains"] = r.prompt_contains;
    if (r.image_sha256) j["image_sha256"] = *r.image_sha256;
    if (r.key) j["key"] = *r.key;
    if (r.status != 200) j["status"] = r.status;
    if (!r.response.empty() || r.status == 200) j["response"] = r.response;
    if (r.times) j["times"] = *r.times;
    rules.push_back(std::move(j));
  }
  doc["rules"] = std::move(rules);
  return doc;
}

MockVlmBackend::MockVlmBackend(MockScript script)
    : script_(std::move(script)), used_(script_.rules.size(), 0) {}

std::shared_ptr<MockVlmBackend> MockVlmBackend::from_file(const std::filesystem::path& path) {
  return std::make_shared<MockVlmBackend>(
      parse_mock_script(parse_json(read_file(path), path.string())));
}

UpstreamReply MockVlmBackend::call(const VlmRequest& request, const std::string& key) {
  std::string image_hash = sha256_hex(request.image);
  const MockRule* hit = nullptr;
  {
    std::lock_guard lock(mu_);
    log_.push_back({key, request.prompt, image_hash, in_flight_});
    ++in_flight_;
    max_in_flight_ = std::max(max_in_flight_, in_flight_);
    for (std::size_t i = 0; i < script_.rules.size(); ++i) {
      const auto& r = script_.rules[i];
      if (r.times && used_[i] >= *r.times) continue;
      if (r.key && *r.key != key) continue;
      if (r.image_sha256 && *r.image_sha256 != image_hash) continue;
      bool all = std::all_of(r.prompt_contains.begin(), r.prompt_contains.end(),
                             [&](const std::string& s) { return request.prompt.find(s) != std::string::npos; });
      if (!all) continue;
      ++used_[i];
      hit = &r;
      break;
    }
  }
  if (script_.latency_ms > 0) {
    std::this_thread::sleep_for(std::chrono::milliseconds(script_.latency_ms));
  }
  UpstreamReply reply;
  if (hit != nullptr) {
    reply.http_status = hit->status;
    reply.text = hit->response;
  } else if (script_.default_response) {
    reply.text = *script_.default_response;
  } else {
    reply.http_status = 404;
    reply.text = "no scripted response";
  }
  switch (reply.http_status) {
    case 200: reply.status = UpstreamStatus::kOk; break;
    case 429:
    case 503: reply.status = UpstreamStatus::kThrottled; break;
    case 408:
    case 504: reply.status = UpstreamStatus::kTimeout; break;
    default: reply.status = UpstreamStatus::kError; break;
  }
  std::lock_guard lock(mu_);
  --in_flight_;
  return reply;
}

std::vector<MockVlmBackend::CallRecord> MockVlmBackend::calls() const {
  std::lock_guard lock(mu_);
  return log_;
}

std::size_t MockVlmBackend::call_count() const {
  std::lock_guard lock(mu_);
  return log_.size();
}

std::size_t MockVlmBackend::max_in_flight() const {
  std::lock_guard lock(mu_);
  return max_in_flight_;
}

// --- remote backend -----------------------------------------------------------

namespace {

std::pair<std::string, std::string> split_url(const std::string& url) {
  auto scheme = url.find("://");
  if (scheme == std::string::npos) {
    throw Error(ErrorCode::kConfigInvalid, "endpoint must be an http(s) URL: " + url);
  }
  auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace

RemoteVlmBackend::RemoteVlmBackend(std::string endpoint_url, std::string api_key,
                                   std::chrono::seconds timeout)
    : api_key_(std::move(api_key)), timeout_(timeout) {
  std::tie(scheme_host_port_, path_) = split_url(endpoint_url);
}

Json RemoteVlmBackend::build_body(const VlmRequest& r) {
  Json content = Json::array();
  content.push_back({{"type", "text"}, {"text", r.prompt}});
  if (!r.image.empty()) {
    content.push_back(
        {{"type", "image_url"},
         {"image_url", {{"url", "data:" + r.media_type + ";base64," + base64_encode(r.image)}}}});
  }
  Json body;
  body["model"] = r.model_id;
  body["messages"] = Json::array({{{"role", "user"}, {"content", std::move(content)}}});
  body["max_tokens"] = r.max_tokens;
  body["temperature"] = r.temperature;
  return body;
}

UpstreamReply RemoteVlmBackend::call(const VlmRequest& request, const std::string& /*key*/) {
  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  auto res = client.Post(path_, headers, dump_json(build_body(request)), "application/json");

  UpstreamReply reply;
  if (!res) {
    auto err = res.error();
    reply.http_status = 0;
    reply.text = httplib::to_string(err);
    reply.status = (err == httplib::Error::Read || err == httplib::Error::Write ||
                    err == httplib::Error::ConnectionTimeout)
                       ? UpstreamStatus::kTimeout
                       : UpstreamStatus::kError;
    return reply;
  }
  reply.http_status = res->status;
  if (res->status == 429 || res->status == 503) {
    reply.status = UpstreamStatus::kThrottled;
    return reply;
  }
  if (res->status == 408 || res->status == 504) {
    reply.status = UpstreamStatus::kTimeout;
    return reply;
  }
  if (res->status != 200) {
    reply.status = UpstreamStatus::kError;
    reply.text = res->body;
    return reply;
  }
  try {
    auto doc = Json::parse(res->body);
    reply.text = doc.at("choices").at(0).at("message").at("content").get<std::string>();
    reply.status = UpstreamStatus::kOk;
  } catch (const Json::exception& e) {
    reply.status = UpstreamStatus::kError;
    reply.text = std::string("unexpected response body: ") + e.what();
  }
  return reply;
}

std::shared_ptr<VlmBackend> make_vlm_backend(const std::string& spec, const std::string& api_key_env) {
  if (spec.rfind("mock:", 0) == 0) return MockVlmBackend::from_file(spec.substr(5));
  if (spec.rfind("http://", 0) == 0 || spec.rfind("https://", 0) == 0) {
    const char* key = std::getenv(api_key_env.c_str());
    return std::make_shared<RemoteVlmBackend>(spec, key ? key : "");
  }
  throw Error(ErrorCode::kConfigInvalid, "unknown VLM backend '" + spec + "'");
}

// --- limiter ------------------------------------------------------------------

TokenBucket::TokenBucket(double rpm, double burst)
    : rate_per_sec_(rpm / 60.0), capacity_(std::max(1.0, burst)), tokens_(capacity_),
      last_(Clock::now()) {}

void TokenBucket::acquire() {
  if (rate_per_sec_ <= 0) return;
  std::unique_lock lock(mu_);
  for (;;) {
    auto now = Clock::now();
    std::chrono::duration<double> dt = now - last_;
    tokens_ = std::min(capacity_, tokens_ + dt.count() * rate_per_sec_);
    last_ = now;
    if (tokens_ >= 1.0) {
      tokens_ -= 1.0;
      return;
    }
    auto wait = std::chrono::duration<double>((1.0 - tokens_) / rate_per_sec_);
    lock.unlock();
    std::this_thread::sleep_for(wait);
    lock.lock();
  }
}

// --- client -------------------------------------------------------------------

VlmClient::VlmClient(std::shared_ptr<VlmBackend> backend, ClientOptions options)
    : backend_(std::move(backend)), options_(std::move(options)), bucket_(options_.rpm) {
  if (!options_.sleep) {
    options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
  options_.max_in_flight = std::max<std::size_t>(1, options_.max_in_flight);
  options_.max_attempts = std::max(1, options_.max_attempts);
}

VlmResponse VlmClient::complete(const VlmRequest& request) {
  if (request.image.empty()) throw Error(ErrorCode::kInvalidArgument, "VLM request has no image");
  return run(request);
}

VlmResponse VlmClient::complete_text(const std::string& model_id, const std::string& prompt,
                                     int max_tokens, double temperature) {
  VlmRequest r;
  r.model_id = model_id;
  r.prompt = prompt;
  r.media_type.clear();
  r.max_tokens = max_tokens;
  r.temperature = temperature;
  return run(r);
}

VlmResponse VlmClient::run(const VlmRequest& request) {
  if (is_blank(request.prompt)) throw Error(ErrorCode::kInvalidArgument, "VLM request has an empty prompt");
  const std::string key = cache_key(request);

  std::promise<VlmResponse> promise;
  {
    std::unique_lock lock(mu_);
    if (auto it = memory_cache_.find(key); it != memory_cache_.end()) {
      ++cache_hits_;
      return {it->second, request_id_for(key), true};
    }
    if (auto it = pending_.find(key); it != pending_.end()) {
      auto fut = it->second;
      lock.unlock();
      VlmResponse r = fut.get();
      r.from_cache = true;
      std::lock_guard relock(mu_);
      ++cache_hits_;
      return r;
    }
    pending_.emplace(key, promise.get_future().share());
  }

  auto finish = [&] {
    std::lock_guard lock(mu_);
    pending_.erase(key);
  };

  try {
    VlmResponse response;
    if (auto disk = cache_lookup(key)) {
      response = {*disk, request_id_for(key), true};
      std::lock_guard lock(mu_);
      ++cache_hits_;
      memory_cache_.emplace(key, *disk);
    } else {
      response = call_upstream(request, key);
    }
    promise.set_value(response);
    finish();
    return response;
  } catch (...) {
    promise.set_exception(std::current_exception());
    finish();
    throw;
  }
}

std::optional<std::string> VlmClient::cache_lookup(const std::string& key) {
  if (options_.cache_dir.empty()) return std::nullopt;
  auto path = options_.cache_dir / key.substr(0, 2) / (key + ".json");
  if (!std::filesystem::is_regular_file(path)) return std::nullopt;
  try {
    auto doc = Json::parse(read_file(path));
    if (doc.at("key").get<std::string>() != key) return std::nullopt;
    return doc.at("response").get<std::string>();
  } catch (const std::exception&) {
    return std::nullopt;  // unreadable entries are treated as misses and rewritten
  }
}

void VlmClient::cache_store(const std::string& key, const VlmRequest& request, const std::string& text) {
  {
    std::lock_guard lock(mu_);
    memory_cache_.emplace(key, text);
  }
  if (options_.cache_dir.empty()) return;
  Json doc;
  doc["key"] = key;
  doc["request_id"] = request_id_for(key);
  doc["model_id"] = request.model_id;
  doc["temperature"] = request.temperature;
  doc["max_tokens"] = request.max_tokens;
  doc["response"] = text;
  std::lock_guard lock(write_mu_);
  write_file_atomic(options_.cache_dir / key.substr(0, 2) / (key + ".json"), dump_json_pretty(doc));
}

VlmResponse VlmClient::call_upstream(const VlmRequest& request, const std::string& key) {
  for (int attempt = 1;; ++attempt) {
    bucket_.acquire();
    UpstreamReply reply;
    {
      std::unique_lock lock(mu_);
      slot_free_.wait(lock, [&] { return in_flight_ < options_.max_in_flight; });
      ++in_flight_;
      ++upstream_calls_;
    }
    try {
      reply = backend_->call(request, key);
    } catch (...) {
      std::lock_guard lock(mu_);
      --in_flight_;
      slot_free_.notify_one();
      throw;
    }
    {
      std::lock_guard lock(mu_);
      --in_flight_;
    }
    slot_free_.notify_one();

    switch (reply.status) {
      case UpstreamStatus::kOk:
        cache_store(key, request, reply.text);
        return {reply.text, request_id_for(key), false};
      case UpstreamStatus::kTimeout:
        throw Error(ErrorCode::kTimeout, "upstream timed out: " + reply.text);
      case UpstreamStatus::kError:
        throw Error(ErrorCode::kUpstreamError,
                    "upstream status " + std::to_string(reply.http_status) + ": " + reply.text);
      case UpstreamStatus::kThrottled:
        break;
    }
    if (attempt >= options_.max_attempts) {
      throw Error(ErrorCode::kRateLimited,
                  "throttled on all " + std::to_string(options_.max_attempts) + " attempts");
    }
    auto delay = std::chrono::milliseconds(static_cast<long long>(
        options_.backoff_base.count() * std::pow(options_.backoff_factor, attempt - 1)));
    options_.sleep(delay);
  }
}

std::size_t VlmClient::upstream_calls() const {
  std::lock_guard lock(mu_);
  return upstream_calls_;
}

std::size_t VlmClient::cache_hits() const {
  std::lock_guard lock(mu_);
  return cache_hits_;
}

}  // namespace forge
