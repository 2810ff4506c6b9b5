#include "phigrade/backend.hpp"

#include <cstdlib>
#include <fstream>
#include <ostream>
#include <regex>
#include <thread>

#include "phigrade/text.hpp"

namespace phigrade {
namespace {

const std::string& final_user_content(const std::vector<Message>& messages) {
  static const std::string kEmpty;
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->role == "user") return it->content;
  }
  return kEmpty;
}

std::string_view status_name(AttemptStatus status) {
  switch (status) {
    case AttemptStatus::kOk:
      return "ok";
    case AttemptStatus::kTransient:
      return "transient";
    case AttemptStatus::kAuth:
      return "auth";
    case AttemptStatus::kSchemaRejected:
      return "schema_rejected";
    case AttemptStatus::kMalformed:
      return "malformed";
    case AttemptStatus::kRejected:
      return "rejected";
    case AttemptStatus::kReplayMiss:
      return "replay_miss";
  }
  return "unknown";
}

bool mentions_schema(const std::string& body) {
  for (const char* needle : {"response_format", "json_schema", "schema", "structured output"}) {
    if (body.find(needle) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

bool is_valid_url(std::string_view url) {
  static const std::regex kUrl(R"(^[A-Za-z][A-Za-z0-9+.\-]*://[^\s/:?#]+(:[0-9]{1,5})?(/[^\s]*)?$)");
  return std::regex_match(url.begin(), url.end(), kUrl);
}

void BackendConfig::validate() const {
  const std::string who = "provider '" + provider_name + "'";
  if (!is_valid_url(endpoint_url)) {
    throw ConfigError(who + ": endpoint_url is not a valid URL: '" + endpoint_url + "'");
  }
  if (max_retries < 0) throw ConfigError(who + ": max_retries must be >= 0");
  if (max_in_flight < 1) throw ConfigError(who + ": max_in_flight must be >= 1");
  if (timeout.count() <= 0) throw ConfigError(who + ": timeout must be positive");
}

BackendConfig backend_config_from_json(const nlohmann::json& row) {
  if (!row.is_object()) throw ConfigError("provider entry must be an object");
  BackendConfig c;
  c.provider_name = row.value("name", std::string());
  if (c.provider_name.empty()) throw ConfigError("provider entry needs a 'name'");
  c.provider_kind = row.value("kind", std::string("openai-compatible"));
  c.endpoint_url = row.value("endpoint_url", std::string());
  if (c.provider_kind == "stub" && c.endpoint_url.empty()) c.endpoint_url = "stub://replay";
  c.model_name = row.value("model", std::string());
  c.api_key_env_var = row.value("api_key_env", std::string());
  c.timeout = std::chrono::milliseconds(
      static_cast<long long>(row.value("timeout_s", 60.0) * 1000.0));
  c.max_retries = row.value("max_retries", 3);
  c.max_in_flight = row.value("max_in_flight", 4);
  if (const auto t = row.find("temperature"); t != row.end()) {
    if (t->is_null()) {
      c.temperature.reset();
    } else if (t->is_number()) {
      c.temperature = t->get<double>();
    } else {
      throw ConfigError("provider '" + c.provider_name + "': temperature must be a number or null");
    }
  }
  if (const auto m = row.find("max_tokens"); m != row.end() && m->is_number_integer()) {
    c.max_tokens = m->get<int>();
  }
  c.backoff_base = std::chrono::milliseconds(row.value("backoff_base_ms", 500));
  c.backoff_cap = std::chrono::milliseconds(row.value("backoff_cap_ms", 8000));
  c.replay_path = row.value("replay_path", std::string());
  c.fault_plan_path = row.value("fault_plan_path", std::string());
  c.validate();
  return c;
}

std::vector<BackendConfig> load_provider_configs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open provider config: " + path.string());
  const auto doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("provider config: malformed JSON in " + path.string());
  const auto providers = doc.find("providers");
  if (providers == doc.end() || !providers->is_array()) {
    throw ConfigError("provider config: expected a 'providers' array");
  }
  std::vector<BackendConfig> out;
  const auto base = path.parent_path();
  for (const auto& row : *providers) {
    BackendConfig c = backend_config_from_json(row);
    if (!c.replay_path.empty() && c.replay_path.is_relative()) c.replay_path = base / c.replay_path;
    if (!c.fault_plan_path.empty() && c.fault_plan_path.is_relative()) {
      c.fault_plan_path = base / c.fault_plan_path;
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::string_view error_kind_name(BackendErrorKind kind) {
  switch (kind) {
    case BackendErrorKind::kInvalidRequest:
      return "invalid_request";
    case BackendErrorKind::kAuth:
      return "auth";
    case BackendErrorKind::kRetriesExhausted:
      return "retries_exhausted";
    case BackendErrorKind::kMalformedResponse:
      return "malformed_response";
    case BackendErrorKind::kSchemaRejected:
      return "schema_rejected";
    case BackendErrorKind::kRequestRejected:
      return "request_rejected";
    case BackendErrorKind::kReplayMiss:
      return "replay_miss";
  }
  return "unknown";
}

nlohmann::json build_request_body(const BackendConfig& config, const std::vector<Message>& messages,
                                  const nlohmann::json* schema) {
  nlohmann::json body;
  body["model"] = config.model_name;
  auto& list = body["messages"] = nlohmann::json::array();
  for (const auto& m : messages) list.push_back({{"role", m.role}, {"content", m.content}});
  if (config.temperature) body["temperature"] = *config.temperature;
  if (config.max_tokens) body["max_tokens"] = *config.max_tokens;
  if (schema != nullptr) {
    body["response_format"] = {
        {"type", "json_schema"},
        {"json_schema", {{"name", "health_data_triples"}, {"strict", true}, {"schema", *schema}}},
    };
  }
  return body;
}

AttemptResult interpret_http_response(int status, const std::string& body, bool schema_attached) {
  AttemptResult r;
  r.http_status = status;
  if (status == 401 || status == 403) {
    r.status = AttemptStatus::kAuth;
    r.error = "authentication failed (HTTP " + std::to_string(status) + ")";
    return r;
  }
  if (status == 408 || status == 409 || status == 429 || status >= 500) {
    r.status = AttemptStatus::kTransient;
    r.error = "transient HTTP " + std::to_string(status);
    return r;
  }
  if (status < 200 || status >= 300) {
    r.status = schema_attached && status == 400 && mentions_schema(body)
                   ? AttemptStatus::kSchemaRejected
                   : AttemptStatus::kRejected;
    r.error = "HTTP " + std::to_string(status);
    return r;
  }
  const auto doc = nlohmann::json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    r.status = AttemptStatus::kMalformed;
    r.error = "provider body is not a JSON object";
    return r;
  }
  const auto choices = doc.find("choices");
  if (choices == doc.end() || !choices->is_array() || choices->empty()) {
    r.status = AttemptStatus::kMalformed;
    r.error = "provider body has no choices";
    return r;
  }
  const auto& first = (*choices)[0];
  const auto message = first.find("message");
  if (message == first.end() || !message->is_object()) {
    r.status = AttemptStatus::kMalformed;
    r.error = "provider choice has no message";
    return r;
  }
  const auto content = message->find("content");
  if (content != message->end() && content->is_string()) {
    r.text = content->get<std::string>();
  } else if (const auto refusal = message->find("refusal");
             refusal != message->end() && refusal->is_string()) {
    r.status = AttemptStatus::kMalformed;
    r.error = "provider refused: " + refusal->get<std::string>();
    return r;
  } else {
    r.status = AttemptStatus::kMalformed;
    r.error = "provider message has no string content";
    return r;
  }
  for (const char* key : {"id", "model", "usage"}) {
    if (const auto it = doc.find(key); it != doc.end()) r.provider_echo[key] = *it;
  }
  r.status = AttemptStatus::kOk;
  return r;
}

void AuditLog::record(const nlohmann::json& entry) {
  const std::string line = entry.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  std::lock_guard lock(mutex_);
  *out_ << line << '\n';
  out_->flush();
}

class CompletionClient::Slot {
 public:
  explicit Slot(const CompletionClient& client) : client_(client) {
    std::unique_lock lock(client_.mutex_);
    client_.cv_.wait(lock, [&] { return client_.in_flight_ < client_.config_.max_in_flight; });
    ++client_.in_flight_;
    client_.peak_ = std::max(client_.peak_, client_.in_flight_);
  }
  ~Slot() {
    {
      std::lock_guard lock(client_.mutex_);
      --client_.in_flight_;
    }
    client_.cv_.notify_one();
  }
  Slot(const Slot&) = delete;
  Slot& operator=(const Slot&) = delete;

 private:
  const CompletionClient& client_;
};

CompletionClient::CompletionClient(BackendConfig config, std::shared_ptr<ChatTransport> transport,
                                   Sleeper sleeper, std::shared_ptr<AuditLog> audit)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      sleeper_(std::move(sleeper)),
      audit_(std::move(audit)) {
  config_.validate();
  if (!transport_) throw ConfigError("provider '" + config_.provider_name + "': no transport");
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

int CompletionClient::peak_in_flight() const {
  std::lock_guard lock(mutex_);
  return peak_;
}

std::chrono::milliseconds CompletionClient::backoff_delay(int retry) const {
  auto delay = config_.backoff_base;
  for (int i = 1; i < retry && delay < config_.backoff_cap; ++i) delay *= 2;
  return std::min(delay, config_.backoff_cap);
}

CompletionResult CompletionClient::complete(const std::vector<Message>& messages,
                                            const std::optional<nlohmann::json>& schema) const {
  if (messages.empty()) {
    throw BackendError(BackendErrorKind::kInvalidRequest, "complete: empty message list");
  }
  std::string api_key;
  if (!config_.api_key_env_var.empty()) {
    const char* value = std::getenv(config_.api_key_env_var.c_str());
    if (value == nullptr || *value == '\0') {
      throw BackendError(BackendErrorKind::kAuth, "provider '" + config_.provider_name +
                                                      "': environment variable " +
                                                      config_.api_key_env_var + " is not set");
    }
    api_key = value;
  }

  const std::string fp = text::fingerprint(final_user_content(messages));
  const nlohmann::json* attached = schema ? &*schema : nullptr;
  CompletionResult result;
  Slot slot(*this);
  const auto started = std::chrono::steady_clock::now();
  const int max_attempts = config_.max_retries + 1;

  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    const auto t0 = std::chrono::steady_clock::now();
    AttemptResult r = transport_->send(ChatRequest{config_, messages, attached, api_key});
    const auto elapsed =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0);
    if (audit_) {
      audit_->record({{"provider", config_.provider_name},
                      {"model", config_.model_name},
                      {"input_fingerprint", fp},
                      {"attempt", attempt},
                      {"schema_attached", attached != nullptr},
                      {"status", status_name(r.status)},
                      {"http_status", r.http_status},
                      {"latency_ms", elapsed.count()},
                      {"response_bytes", r.text.size()},
                      {"error", r.error}});
    }
    const std::string where = "provider '" + config_.provider_name + "'";
    switch (r.status) {
      case AttemptStatus::kOk:
        result.raw_text = std::move(r.text);
        result.attempt_count = attempt;
        result.provider_echo = std::move(r.provider_echo);
        result.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - started);
        return result;
      case AttemptStatus::kTransient:
        if (attempt < max_attempts) {
          sleeper_(backoff_delay(attempt));
          continue;
        }
        throw BackendError(BackendErrorKind::kRetriesExhausted,
                           where + ": retries exhausted after " + std::to_string(attempt) +
                               " attempts (" + r.error + ")",
                           attempt);
      case AttemptStatus::kSchemaRejected:
        if (attached != nullptr && attempt < max_attempts) {
          attached = nullptr;
          result.schema_dropped = true;
          continue;
        }
        throw BackendError(BackendErrorKind::kSchemaRejected, where + ": " + r.error, attempt);
      case AttemptStatus::kAuth:
        throw BackendError(BackendErrorKind::kAuth, where + ": " + r.error, attempt);
      case AttemptStatus::kMalformed:
        throw BackendError(BackendErrorKind::kMalformedResponse, where + ": " + r.error, attempt);
      case AttemptStatus::kRejected:
        throw BackendError(BackendErrorKind::kRequestRejected, where + ": " + r.error, attempt);
      case AttemptStatus::kReplayMiss:
        throw BackendError(BackendErrorKind::kReplayMiss, where + ": " + r.error, attempt);
    }
  }
  throw BackendError(BackendErrorKind::kRetriesExhausted, "unreachable", max_attempts);
}

std::shared_ptr<CompletionClient> make_client(const BackendConfig& config,
                                              std::shared_ptr<AuditLog> audit) {
  if (config.provider_kind == "stub") {
    ReplayTable replay;
    FaultPlan faults;
    if (!config.replay_path.empty()) {
      std::ifstream in(config.replay_path);
      if (!in) throw IoError("cannot open replay table: " + config.replay_path.string());
      replay = load_replay_table(in);
    }
    if (!config.fault_plan_path.empty()) {
      std::ifstream in(config.fault_plan_path);
      if (!in) throw IoError("cannot open fault plan: " + config.fault_plan_path.string());
      faults = load_fault_plan(in);
    }
    return std::make_shared<CompletionClient>(
        config, std::make_shared<StubTransport>(std::move(replay), std::move(faults)),
        [](std::chrono::milliseconds) {}, std::move(audit));
  }
  return std::make_shared<CompletionClient>(config, make_http_transport(), Sleeper{},
                                            std::move(audit));
}

}  // namespace phigrade
