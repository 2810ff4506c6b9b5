#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <deque>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "phigrade/backend.hpp"
#include "phigrade/text.hpp"
#include "phigrade/validator.hpp"
#include "support.hpp"

using namespace phigrade;
using namespace std::chrono_literals;

namespace {

// Transport that replays a scripted sequence of statuses and records what it
// was asked.
class ScriptedTransport : public ChatTransport {
 public:
  explicit ScriptedTransport(std::deque<AttemptResult> script, std::chrono::milliseconds hold = 0ms)
      : script_(std::move(script)), hold_(hold) {}

  AttemptResult send(const ChatRequest& request) override {
    const int now = ++in_flight_;
    int seen = peak_.load();
    while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
    }
    if (hold_.count() > 0) std::this_thread::sleep_for(hold_);
    AttemptResult r;
    {
      std::lock_guard lock(mutex_);
      schema_seen_.push_back(request.schema != nullptr);
      keys_seen_.push_back(request.api_key);
      if (!script_.empty()) {
        r = script_.front();
        if (script_.size() > 1) script_.pop_front();
      }
    }
    --in_flight_;
    return r;
  }

  int calls() const {
    std::lock_guard lock(mutex_);
    return static_cast<int>(schema_seen_.size());
  }
  std::vector<bool> schema_seen() const {
    std::lock_guard lock(mutex_);
    return schema_seen_;
  }
  std::vector<std::string> keys_seen() const {
    std::lock_guard lock(mutex_);
    return keys_seen_;
  }
  int peak() const { return peak_.load(); }

 private:
  mutable std::mutex mutex_;
  std::deque<AttemptResult> script_;
  std::chrono::milliseconds hold_;
  std::vector<bool> schema_seen_;
  std::vector<std::string> keys_seen_;
  std::atomic<int> in_flight_{0};
  std::atomic<int> peak_{0};
};

AttemptResult status(AttemptStatus s, std::string text = "[]") {
  AttemptResult r;
  r.status = s;
  r.text = std::move(text);
  return r;
}

BackendConfig config(std::string key_env = "") {
  BackendConfig c;
  c.provider_name = "test";
  c.endpoint_url = "http://127.0.0.1:9/v1/chat/completions";
  c.model_name = "m";
  c.api_key_env_var = std::move(key_env);
  return c;
}

const std::vector<Message> kMessages = {{"system", "sys"}, {"user", "患者：机密内容ABC"}};

struct SleepLog {
  std::mutex mutex;
  std::vector<std::chrono::milliseconds> delays;
  Sleeper sleeper() {
    return [this](std::chrono::milliseconds d) {
      std::lock_guard lock(mutex);
      delays.push_back(d);
    };
  }
};

}  // namespace

TEST_CASE("two transient failures then success takes three attempts") {
  auto t = std::make_shared<ScriptedTransport>(std::deque<AttemptResult>{
      status(AttemptStatus::kTransient), status(AttemptStatus::kTransient), status(AttemptStatus::kOk, "ok")});
  SleepLog sleeps;
  CompletionClient client(config(), t, sleeps.sleeper());
  const auto r = client.complete(kMessages, std::nullopt);
  CHECK(r.attempt_count == 3);
  CHECK(r.raw_text == "ok");
  CHECK(sleeps.delays == std::vector<std::chrono::milliseconds>{500ms, 1000ms});
}

TEST_CASE("backoff doubles up to the cap") {
  CompletionClient client(config(), std::make_shared<ScriptedTransport>(std::deque<AttemptResult>{}));
  const std::chrono::milliseconds expected[] = {500ms, 1000ms, 2000ms, 4000ms, 8000ms, 8000ms, 8000ms};
  for (int retry = 1; retry <= 7; ++retry) CHECK(client.backoff_delay(retry) == expected[retry - 1]);
}

TEST_CASE("retries exhaust after max_retries + 1 attempts") {
  auto t = std::make_shared<ScriptedTransport>(std::deque<AttemptResult>{status(AttemptStatus::kTransient)});
  SleepLog sleeps;
  CompletionClient client(config(), t, sleeps.sleeper());
  try {
    client.complete(kMessages, std::nullopt);
    FAIL("expected BackendError");
  } catch (const BackendError& e) {
    CHECK(e.kind() == BackendErrorKind::kRetriesExhausted);
    CHECK(e.attempts() == 4);
  }
  CHECK(t->calls() == 4);
  CHECK(sleeps.delays.size() == 3);
}

TEST_CASE("non-retryable statuses stop at the first attempt") {
  const std::pair<AttemptStatus, BackendErrorKind> cases[] = {
      {AttemptStatus::kAuth, BackendErrorKind::kAuth},
      {AttemptStatus::kRejected, BackendErrorKind::kRequestRejected},
      {AttemptStatus::kMalformed, BackendErrorKind::kMalformedResponse},
      {AttemptStatus::kReplayMiss, BackendErrorKind::kReplayMiss},
  };
  for (const auto& [st, kind] : cases) {
    auto t = std::make_shared<ScriptedTransport>(std::deque<AttemptResult>{status(st)});
    CompletionClient client(config(), t, [](auto) {});
    try {
      client.complete(kMessages, std::nullopt);
      FAIL("expected BackendError");
    } catch (const BackendError& e) {
      CHECK(e.kind() == kind);
    }
    CHECK(t->calls() == 1);
  }
}

TEST_CASE("missing api key fails before any network call") {
  ::unsetenv("PHIGRADE_TEST_MISSING_KEY");
  auto t = std::make_shared<ScriptedTransport>(std::deque<AttemptResult>{status(AttemptStatus::kOk)});
  CompletionClient client(config("PHIGRADE_TEST_MISSING_KEY"), t);
  try {
    client.complete(kMessages, std::nullopt);
    FAIL("expected BackendError");
  } catch (const BackendError& e) {
    CHECK(e.kind() == BackendErrorKind::kAuth);
    CHECK(std::string(e.what()).find("PHIGRADE_TEST_MISSING_KEY") != std::string::npos);
  }
  CHECK(t->calls() == 0);
}

TEST_CASE("empty message list is an invalid request") {
  CompletionClient client(config(), std::make_shared<ScriptedTransport>(std::deque<AttemptResult>{}));
  CHECK_THROWS_AS(client.complete({}, std::nullopt), BackendError);
}

TEST_CASE("schema refusal drops the schema once") {
  auto t = std::make_shared<ScriptedTransport>(std::deque<AttemptResult>{
      status(AttemptStatus::kSchemaRejected), status(AttemptStatus::kOk, "[]")});
  CompletionClient client(config(), t, [](auto) {});
  const std::optional<nlohmann::json> schema(output_schema(phigrade::testing::taxonomy()));
  const auto r = client.complete(kMessages, schema);
  CHECK(r.schema_dropped);
  CHECK(t->schema_seen() == std::vector<bool>{true, false});

  auto again = std::make_shared<ScriptedTransport>(std::deque<AttemptResult>{status(AttemptStatus::kSchemaRejected)});
  CompletionClient stubborn(config(), again, [](auto) {});
  try {
    stubborn.complete(kMessages, schema);
    FAIL("expected BackendError");
  } catch (const BackendError& e) {
    CHECK(e.kind() == BackendErrorKind::kSchemaRejected);
  }
  CHECK(again->calls() == 2);
}

TEST_CASE("in-flight requests are capped") {
  auto t = std::make_shared<ScriptedTransport>(std::deque<AttemptResult>{status(AttemptStatus::kOk)}, 15ms);
  auto c = config();
  c.max_in_flight = 2;
  CompletionClient client(c, t);
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&] { client.complete(kMessages, std::nullopt); });
  }
  for (auto& th : threads) th.join();
  CHECK(t->calls() == 8);
  CHECK(t->peak() <= 2);
  CHECK(client.peak_in_flight() <= 2);
  CHECK(client.peak_in_flight() >= 1);
}

TEST_CASE("audit log carries neither the key nor message text") {
  ::setenv("PHIGRADE_TEST_KEY", "sk-test-0123456789secret", 1);
  auto t = std::make_shared<ScriptedTransport>(std::deque<AttemptResult>{
      status(AttemptStatus::kTransient), status(AttemptStatus::kOk, "[]")});
  std::ostringstream sink;
  auto audit = std::make_shared<AuditLog>(sink);
  CompletionClient client(config("PHIGRADE_TEST_KEY"), t, [](auto) {}, audit);
  client.complete(kMessages, std::nullopt);
  const std::string log = sink.str();
  CHECK(log.find("sk-test-0123456789secret") == std::string::npos);
  CHECK(log.find("机密内容") == std::string::npos);
  CHECK(log.find(text::fingerprint(kMessages.back().content)) != std::string::npos);
  std::istringstream lines(log);
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    const auto entry = nlohmann::json::parse(line);
    CHECK(entry["attempt"] == ++n);
    CHECK(entry.contains("latency_ms"));
  }
  CHECK(n == 2);
  CHECK(t->keys_seen().back() == "sk-test-0123456789secret");
  ::unsetenv("PHIGRADE_TEST_KEY");
}

TEST_CASE("request body") {
  auto c = config();
  const auto schema = output_schema(phigrade::testing::taxonomy());
  auto body = build_request_body(c, kMessages, &schema);
  CHECK(body["model"] == "m");
  CHECK(body["messages"].size() == 2);
  CHECK(body["temperature"] == 0.0);
  CHECK(body["response_format"]["type"] == "json_schema");
  c.temperature.reset();
  c.max_tokens = 256;
  body = build_request_body(c, kMessages, nullptr);
  CHECK_FALSE(body.contains("temperature"));
  CHECK_FALSE(body.contains("response_format"));
  CHECK(body["max_tokens"] == 256);
}

TEST_CASE("http response classification") {
  CHECK(interpret_http_response(401, "", false).status == AttemptStatus::kAuth);
  CHECK(interpret_http_response(403, "", false).status == AttemptStatus::kAuth);
  CHECK(interpret_http_response(429, "", false).status == AttemptStatus::kTransient);
  CHECK(interpret_http_response(503, "", false).status == AttemptStatus::kTransient);
  CHECK(interpret_http_response(400, "bad", false).status == AttemptStatus::kRejected);
  CHECK(interpret_http_response(400, "response_format unsupported", true).status ==
        AttemptStatus::kSchemaRejected);
  CHECK(interpret_http_response(400, "response_format unsupported", false).status ==
        AttemptStatus::kRejected);
  CHECK(interpret_http_response(200, "not json", false).status == AttemptStatus::kMalformed);
  CHECK(interpret_http_response(200, R"({"choices":[]})", false).status == AttemptStatus::kMalformed);
  const auto ok = interpret_http_response(
      200, R"({"id":"x","model":"m","choices":[{"message":{"role":"assistant","content":"[]"}}]})", false);
  CHECK(ok.status == AttemptStatus::kOk);
  CHECK(ok.text == "[]");
  CHECK(ok.provider_echo["id"] == "x");
}

TEST_CASE("config validation and provider files") {
  CHECK(is_valid_url("https://api.openai.com/v1/chat/completions"));
  CHECK(is_valid_url("http://127.0.0.1:8000/v1"));
  CHECK_FALSE(is_valid_url("api.openai.com"));
  CHECK_FALSE(is_valid_url("http://exa mple.com"));
  auto c = config();
  c.endpoint_url = "nonsense";
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = config();
  c.max_in_flight = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = config();
  c.max_retries = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);

  const auto providers = load_provider_configs(phigrade::testing::data_dir() / "providers.example.json");
  REQUIRE(providers.size() == 4);
  CHECK(providers[0].provider_name == "openai-gpt-4o-mini");
  CHECK(providers[0].api_key_env_var == "OPENAI_API_KEY");
  CHECK(providers[0].temperature == 0.0);
  CHECK(providers[1].max_in_flight == 2);
  CHECK_FALSE(providers[2].temperature.has_value());
  CHECK(providers[2].api_key_env_var.empty());
  CHECK(providers[3].provider_kind == "stub");
  CHECK(providers[3].replay_path == phigrade::testing::data_dir() / "replay.jsonl");
}

TEST_CASE("stub replays, misses and injects faults") {
  std::istringstream replay_in(
      "{\"input\":\"病例十七\",\"response\":\"{\\\"triples\\\":[{\\\"entity\\\":\\\"张某\\\",\\\"category\\\":\\\"patient name\\\",\\\"level\\\":4},{\\\"entity\\\":\\\"胃炎\\\",\\\"category\\\":\\\"disease\\\",\\\"level\\\":3}]}\"}\n"
      "{\"input\":\"病例十八\",\"response\":\"[]\"}\n");
  const auto replay = load_replay_table(replay_in);
  REQUIRE(replay.size() == 2);
  const std::vector<Message> msgs17 = {{"system", "s"}, {"user", "病例十七"}};
  const std::vector<Message> msgs18 = {{"system", "s"}, {"user", "病例十八"}};

  auto plain = make_stub_backend(replay);
  CHECK(plain->complete(msgs17, std::nullopt).raw_text == replay.at(text::fingerprint("病例十七")));
  try {
    plain->complete({{"user", "unknown"}}, std::nullopt);
    FAIL("expected miss");
  } catch (const BackendError& e) {
    CHECK(e.kind() == BackendErrorKind::kReplayMiss);
  }
  CHECK_THROWS_AS(make_stub_backend({})->complete(msgs18, std::nullopt), BackendError);

  std::istringstream faults_in(
      "{\"input\":\"病例十七\",\"kind\":\"transient_errors\",\"count\":2}\n"
      "{\"input\":\"病例十八\",\"kind\":\"permanent_error\"}\n");
  auto flaky = make_stub_backend(replay, load_fault_plan(faults_in));
  CHECK(flaky->complete(msgs17, std::nullopt).attempt_count == 3);
  CHECK(flaky->complete(msgs17, std::nullopt).attempt_count == 1);
  CHECK_THROWS_AS(flaky->complete(msgs18, std::nullopt), BackendError);

  const auto& tax = phigrade::testing::taxonomy();
  auto with = [&](std::string line) {
    std::istringstream in(line);
    return make_stub_backend(replay, load_fault_plan(in))->complete(msgs17, std::nullopt).raw_text;
  };
  CHECK(parse_and_validate(with(R"({"input":"病例十七","kind":"malformed_json"})"), tax).parse_failed);
  auto out = parse_and_validate(with(R"({"input":"病例十七","kind":"out_of_vocabulary","item_index":1})"), tax);
  CHECK(out.accepted.size() == 1);
  REQUIRE(out.rejected.size() == 1);
  CHECK(out.rejected[0].reason == RejectReason::kBadCategory);
  out = parse_and_validate(with(R"({"input":"病例十七","kind":"out_of_range_level","level":9})"), tax);
  REQUIRE(out.rejected.size() == 1);
  CHECK(out.rejected[0].reason == RejectReason::kBadLevel);
  CHECK(with(R"({"input":"病例十七","kind":"replace_response","text":"[]"})") == "[]");

  std::istringstream bad_kind(R"({"input":"x","kind":"explode"})");
  CHECK_THROWS_AS(load_fault_plan(bad_kind), ConfigError);
  std::istringstream conflict("{\"input\":\"a\",\"response\":\"1\"}\n{\"input\":\"a\",\"response\":\"2\"}\n");
  CHECK_THROWS_AS(load_replay_table(conflict), ConfigError);
}

TEST_CASE("http transport against a local server") {
  httplib::Server server;
  std::atomic<int> hits{0};
  std::string seen_auth;
  nlohmann::json seen_body;
  std::mutex seen_mutex;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    const int n = ++hits;
    {
      std::lock_guard lock(seen_mutex);
      seen_auth = req.get_header_value("Authorization");
      seen_body = nlohmann::json::parse(req.body);
    }
    if (n == 1) {
      res.status = 429;
      res.set_content("{\"error\":\"slow down\"}", "application/json");
      return;
    }
    if (n == 2 && seen_body.contains("response_format")) {
      res.status = 400;
      res.set_content("{\"error\":\"response_format json_schema is not supported\"}", "application/json");
      return;
    }
    res.set_content(R"({"id":"cmpl-1","model":"local","choices":[{"message":{"role":"assistant","content":"[{\"entity\":\"张某\",\"category\":\"patient name\",\"level\":4}]"}}]})",
                    "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread serve([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  ::setenv("PHIGRADE_TEST_LOCAL_KEY", "local-key", 1);
  auto c = config("PHIGRADE_TEST_LOCAL_KEY");
  c.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  c.timeout = 5000ms;
  SleepLog sleeps;
  CompletionClient client(c, make_http_transport(), sleeps.sleeper());
  const std::optional<nlohmann::json> schema(output_schema(phigrade::testing::taxonomy()));
  const auto r = client.complete(kMessages, schema);
  server.stop();
  serve.join();
  ::unsetenv("PHIGRADE_TEST_LOCAL_KEY");

  CHECK(hits == 3);
  CHECK(r.attempt_count == 3);
  CHECK(r.schema_dropped);
  CHECK(r.provider_echo["id"] == "cmpl-1");
  CHECK(sleeps.delays == std::vector<std::chrono::milliseconds>{500ms});
  CHECK(seen_auth == "Bearer local-key");
  CHECK(seen_body["messages"].size() == 2);
  CHECK(parse_and_validate(r.raw_text, phigrade::testing::taxonomy()).accepted.size() == 1);
}

TEST_CASE("unreachable endpoint is transient") {
  auto c = config();
  c.endpoint_url = "http://127.0.0.1:1/v1/chat/completions";
  c.max_retries = 1;
  c.timeout = 500ms;
  SleepLog sleeps;
  CompletionClient client(c, make_http_transport(), sleeps.sleeper());
  try {
    client.complete(kMessages, std::nullopt);
    FAIL("expected BackendError");
  } catch (const BackendError& e) {
    CHECK(e.kind() == BackendErrorKind::kRetriesExhausted);
    CHECK(e.attempts() == 2);
  }
}
