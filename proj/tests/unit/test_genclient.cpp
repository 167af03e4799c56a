// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdlib>
#include <mutex>
#include <thread>

#include "forge/error.hpp"
#include "forge/genclient.hpp"
#include "forge/hash.hpp"
#include "support/fake_server.hpp"
#include "support/fixtures.hpp"

using namespace forge;
using namespace std::chrono_literals;

namespace {

VlmRequest request(std::string prompt = "Describe", std::string image = "png-bytes") {
  VlmRequest r;
  r.model_id = "m";
  r.prompt = std::move(prompt);
  r.image = std::move(image);
  return r;
}

MockScript always(const std::string& text, int status = 200, int latency_ms = 0) {
  MockScript s;
  s.rules.push_back({{}, {}, {}, text, status, {}});
  s.latency_ms = latency_ms;
  return s;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kIoError;
}

}  // namespace

TEST_CASE("cache key covers every request field") {
  VlmRequest base = request();
  std::string k = cache_key(base);
  CHECK(k.size() == 64);
  CHECK(cache_key(base) == k);
  auto differs = [&](auto mutate) {
    VlmRequest r = base;
    mutate(r);
    return cache_key(r) != k;
  };
  CHECK(differs([](VlmRequest& r) { r.model_id = "m2"; }));
  CHECK(differs([](VlmRequest& r) { r.prompt += " "; }));
  CHECK(differs([](VlmRequest& r) { r.image += "x"; }));
  CHECK(differs([](VlmRequest& r) { r.temperature = 0.7; }));
  CHECK(differs([](VlmRequest& r) { r.max_tokens = 10; }));
  CHECK(request_id_for(k) == "req-" + k.substr(0, 24));
  CHECK(media_type_for("a/b.JPG") == "image/jpeg");
  CHECK(media_type_for("a/b") == "image/png");
}

TEST_CASE("identical requests reach the upstream once") {
  auto backend = std::make_shared<MockVlmBackend>(always("hello"));
  VlmClient client(backend);
  auto first = client.complete(request());
  auto second = client.complete(request());
  CHECK(first.text == "hello");
  CHECK_FALSE(first.from_cache);
  CHECK(second.from_cache);
  CHECK(second.request_id == first.request_id);
  CHECK(backend->call_count() == 1);
  CHECK(client.upstream_calls() == 1);
  CHECK(client.cache_hits() == 1);
}

TEST_CASE("disk cache survives a new client and ignores file names") {
  fixtures::TempDir dir("vlmcache");
  ClientOptions opts;
  opts.cache_dir = dir / "cache";
  auto backend = std::make_shared<MockVlmBackend>(always("cached text"));
  {
    VlmClient client(backend, opts);
    client.complete(request("p", "same bytes"));
  }
  VlmClient fresh(backend, opts);
  // The request carries bytes only, so a renamed copy of the image is a hit.
  auto r = fresh.complete(request("p", "same bytes"));
  CHECK(r.from_cache);
  CHECK(r.text == "cached text");
  CHECK(backend->call_count() == 1);
  // A corrupt entry reads as a miss and is rewritten.
  auto key = cache_key(request("p", "same bytes"));
  write_file_atomic(opts.cache_dir / key.substr(0, 2) / (key + ".json"), "{garbage");
  VlmClient third(backend, opts);
  CHECK_FALSE(third.complete(request("p", "same bytes")).from_cache);
  CHECK(backend->call_count() == 2);
}

TEST_CASE("throttling backs off exponentially then gives up") {
  auto backend = std::make_shared<MockVlmBackend>(always("", 429));
  std::vector<std::chrono::milliseconds> sleeps;
  ClientOptions opts;
  opts.sleep = [&](std::chrono::milliseconds d) { sleeps.push_back(d); };
  VlmClient client(backend, opts);
  CHECK(code_of([&] { client.complete(request()); }) == ErrorCode::kRateLimited);
  CHECK(backend->call_count() == 5);
  CHECK(sleeps == std::vector<std::chrono::milliseconds>{1000ms, 2000ms, 4000ms, 8000ms});
}

TEST_CASE("throttling that clears is retried transparently") {
  MockScript s;
  s.rules.push_back({{}, {}, {}, "", 503, 2});
  s.rules.push_back({{}, {}, {}, "finally", 200, {}});
  auto backend = std::make_shared<MockVlmBackend>(s);
  ClientOptions opts;
  opts.sleep = [](std::chrono::milliseconds) {};
  VlmClient client(backend, opts);
  CHECK(client.complete(request()).text == "finally");
  CHECK(backend->call_count() == 3);
}

TEST_CASE("timeouts and errors are not retried or cached") {
  for (auto [status, code] : {std::pair{504, ErrorCode::kTimeout}, std::pair{500, ErrorCode::kUpstreamError}}) {
    auto backend = std::make_shared<MockVlmBackend>(always("", status));
    ClientOptions opts;
    opts.sleep = [](std::chrono::milliseconds) { FAIL("no backoff expected"); };
    VlmClient client(backend, opts);
    CHECK(code_of([&] { client.complete(request()); }) == code);
    CHECK(code_of([&] { client.complete(request()); }) == code);
    CHECK(backend->call_count() == 2);
  }
}

TEST_CASE("in-flight cap and concurrent deduplication") {
  auto backend = std::make_shared<MockVlmBackend>(always("ok", 200, 20));
  ClientOptions opts;
  opts.max_in_flight = 2;
  VlmClient client(backend, opts);
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&, i] { client.complete(request("p" + std::to_string(i % 4))); });
  }
  for (auto& t : threads) t.join();
  CHECK(backend->max_in_flight() <= 2);
  CHECK(backend->call_count() == 4);
  CHECK(client.cache_hits() == 4);
}

TEST_CASE("invalid requests") {
  VlmClient client(std::make_shared<MockVlmBackend>(always("x")));
  CHECK(code_of([&] { client.complete(request("p", "")); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([&] { client.complete(request("  ", "img")); }) == ErrorCode::kInvalidArgument);
  CHECK(client.complete_text("m", "text only").text == "x");
}

TEST_CASE("mock script rules and file round trip") {
  fixtures::TempDir dir("mock");
  MockScript s;
  s.rules.push_back({{"alpha", "beta"}, {}, {}, "both", 200, {}});
  s.rules.push_back({{"alpha"}, sha256_hex("img"), {}, "alpha+img", 200, {}});
  s.default_response = "fallback";
  write_file_atomic(dir / "m.json", dump_json_pretty(to_json(s)));
  auto backend = MockVlmBackend::from_file(dir / "m.json");
  VlmClient client(backend);
  CHECK(client.complete(request("alpha beta", "other")).text == "both");
  CHECK(client.complete(request("alpha", "img")).text == "alpha+img");
  CHECK(client.complete(request("alpha", "other")).text == "fallback");
  CHECK(code_of([] { parse_mock_script(Json{{"rules", Json::array({{{"times", "x"}}})}}); }) ==
        ErrorCode::kConfigInvalid);
}

TEST_CASE("remote backend speaks the chat-completions shape") {
  fixtures::FakeServer fake;
  std::mutex mu;
  Json seen;
  std::string auth;
  int throttle_left = 1;
  fake.server.Post("/v1/chat", [&](const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(mu);
    seen = Json::parse(req.body);
    auth = req.get_header_value("Authorization");
    if (throttle_left-- > 0) {
      res.status = 429;
      return;
    }
    res.set_content(dump_json({{"choices", {{{"message", {{"content", "pong"}}}}}}}), "application/json");
  });
  fake.start();

  auto backend = std::make_shared<RemoteVlmBackend>(fake.url() + "/v1/chat", "sekrit");
  ClientOptions opts;
  opts.sleep = [](std::chrono::milliseconds) {};
  VlmClient client(backend, opts);
  VlmRequest r = request("ping", "\x89PNG");
  r.temperature = 0.7;
  CHECK(client.complete(r).text == "pong");
  std::lock_guard lock(mu);
  CHECK(auth == "Bearer sekrit");
  CHECK(seen["model"] == "m");
  CHECK(seen["temperature"] == 0.7);
  const auto& content = seen["messages"][0]["content"];
  CHECK(content[0]["text"] == "ping");
  CHECK(content[1]["image_url"]["url"] == "data:image/png;base64," + base64_encode("\x89PNG"));
  CHECK(RemoteVlmBackend::build_body(request("t", "")).at("messages")[0]["content"].size() == 1);
}

TEST_CASE("backend spec resolution") {
  CHECK(code_of([] { make_vlm_backend("ftp://nope"); }) == ErrorCode::kConfigInvalid);
  ::setenv("FORGE_TEST_KEY", "k", 1);
  CHECK(dynamic_cast<RemoteVlmBackend*>(make_vlm_backend("https://example.invalid/v1", "FORGE_TEST_KEY").get()));
}
