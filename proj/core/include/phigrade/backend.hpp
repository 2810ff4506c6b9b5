#pragma once

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "phigrade/error.hpp"
#include "phigrade/prompt.hpp"

namespace phigrade {

struct BackendConfig {
  std::string provider_name;  // config key, e.g. "openai-gpt-4o-mini"
  std::string provider_kind = "openai-compatible";  // or "stub"
  std::string endpoint_url;   // full chat-completions URL
  std::string model_name;
  std::string api_key_env_var;  // empty: no Authorization header
  std::chrono::milliseconds timeout{60'000};
  int max_retries = 3;
  std::optional<double> temperature = 0.0;  // nullopt: omitted from requests
  std::optional<int> max_tokens;
  int max_in_flight = 4;
  std::chrono::milliseconds backoff_base{500};
  std::chrono::milliseconds backoff_cap{8'000};
  std::filesystem::path replay_path;      // stub only
  std::filesystem::path fault_plan_path;  // stub only, optional

  // Throws ConfigError when the URL is not syntactically valid, or
  // max_retries < 0, or max_in_flight < 1.
  void validate() const;
};

bool is_valid_url(std::string_view url);

// Reads {"providers": [ {...}, ... ]}. Relative replay/fault paths resolve
// against the config file's directory.
std::vector<BackendConfig> load_provider_configs(const std::filesystem::path& path);
BackendConfig backend_config_from_json(const nlohmann::json& row);

struct CompletionResult {
  std::string raw_text;
  std::chrono::milliseconds latency{0};
  int attempt_count = 0;
  bool schema_dropped = false;  // provider refused the schema; resent without it
  nlohmann::json provider_echo;  // id/model/usage when the provider returns them
};

enum class BackendErrorKind {
  kInvalidRequest,
  kAuth,
  kRetriesExhausted,
  kMalformedResponse,
  kSchemaRejected,
  kRequestRejected,
  kReplayMiss,
};

std::string_view error_kind_name(BackendErrorKind kind);

class BackendError : public Error {
 public:
  BackendError(BackendErrorKind kind, const std::string& what, int attempts = 0)
      : Error(what), kind_(kind), attempts_(attempts) {}
  BackendErrorKind kind() const noexcept { return kind_; }
  int attempts() const noexcept { return attempts_; }

 private:
  BackendErrorKind kind_;
  int attempts_;
};

// Outcome of one wire attempt, before retry policy is applied.
enum class AttemptStatus {
  kOk,
  kTransient,       // timeouts, connection failures, 408/429/5xx
  kAuth,            // 401/403
  kSchemaRejected,  // provider refused the response_format parameter
  kMalformed,       // 2xx with an unusable body
  kRejected,        // other 4xx; never retried
  kReplayMiss,      // stub only
};

struct AttemptResult {
  AttemptStatus status = AttemptStatus::kOk;
  int http_status = 0;
  std::string text;   // assistant content when kOk
  std::string error;  // diagnostic, never contains secrets
  nlohmann::json provider_echo;
};

struct ChatRequest {
  const BackendConfig& config;
  const std::vector<Message>& messages;
  const nlohmann::json* schema;  // null when not attached
  const std::string& api_key;
};

class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual AttemptResult send(const ChatRequest& request) = 0;
};

// OpenAI-style chat-completion body shared by every provider.
nlohmann::json build_request_body(const BackendConfig& config, const std::vector<Message>& messages,
                                  const nlohmann::json* schema);

// Classifies a provider HTTP response. Exposed for tests.
AttemptResult interpret_http_response(int status, const std::string& body, bool schema_attached);

std::shared_ptr<ChatTransport> make_http_transport();

// JSON-lines audit sink. Records carry provider, model, input fingerprint,
// attempt number, status and latency; never message text or credentials.
class AuditLog {
 public:
  explicit AuditLog(std::ostream& out) : out_(&out) {}
  void record(const nlohmann::json& entry);

 private:
  std::mutex mutex_;
  std::ostream* out_;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

// complete() contract: retries transient failures with capped exponential
// backoff, never retries auth or request rejections, drops the schema once if
// the provider refuses it, and caps concurrent in-flight requests at
// config.max_in_flight. Thread-safe.
class CompletionClient {
 public:
  CompletionClient(BackendConfig config, std::shared_ptr<ChatTransport> transport,
                   Sleeper sleeper = {}, std::shared_ptr<AuditLog> audit = nullptr);

  CompletionResult complete(const std::vector<Message>& messages,
                            const std::optional<nlohmann::json>& schema) const;

  const BackendConfig& config() const noexcept { return config_; }

  // Highest number of simultaneously in-flight requests observed.
  int peak_in_flight() const;

  std::chrono::milliseconds backoff_delay(int retry) const;

 private:
  class Slot;

  BackendConfig config_;
  std::shared_ptr<ChatTransport> transport_;
  Sleeper sleeper_;
  std::shared_ptr<AuditLog> audit_;

  mutable std::mutex mutex_;
  mutable std::condition_variable cv_;
  mutable int in_flight_ = 0;
  mutable int peak_ = 0;
};

// ---- Stub backend -------------------------------------------------------

enum class FaultKind {
  kTransientErrors,  // first `count` calls fail transiently, then replay
  kPermanentError,   // every call fails transiently (exhausts retries)
  kMalformedJson,    // replay is replaced by truncated JSON
  kOutOfVocabulary,  // item `item_index` gets category "favorite color"
  kOutOfRangeLevel,  // item `item_index` gets level `level`
  kReplaceResponse,  // replay replaced by `text`
};

struct Fault {
  FaultKind kind = FaultKind::kTransientErrors;
  int count = 1;
  std::size_t item_index = 0;
  long long level = 9;
  std::string text;
};

// Key: fingerprint of the final user message (text::fingerprint).
using ReplayTable = std::map<std::string, std::string>;
using FaultPlan = std::map<std::string, Fault>;

// Replay lines: {"input" | "fingerprint": ..., "response": ...}.
ReplayTable load_replay_table(std::istream& in);
// Fault lines: {"input" | "fingerprint": ..., "kind": ..., "count", "item_index", "level", "text"}.
FaultPlan load_fault_plan(std::istream& in);

// Deterministic, thread-safe transport. Unknown fingerprints yield kReplayMiss.
class StubTransport : public ChatTransport {
 public:
  explicit StubTransport(ReplayTable replay, FaultPlan faults = {},
                         std::chrono::milliseconds simulated_latency = std::chrono::milliseconds{0});
  AttemptResult send(const ChatRequest& request) override;

  std::size_t calls() const;

 private:
  ReplayTable replay_;
  FaultPlan faults_;
  std::chrono::milliseconds latency_;
  mutable std::mutex mutex_;
  std::map<std::string, int> transient_served_;
  std::size_t calls_ = 0;
};

// Stub conforming to the complete() contract. Backoff sleeps are skipped.
std::shared_ptr<CompletionClient> make_stub_backend(ReplayTable replay, FaultPlan faults = {},
                                                    BackendConfig config = {});

// Builds a client for any configured provider ("stub" reads replay_path).
std::shared_ptr<CompletionClient> make_client(const BackendConfig& config,
                                              std::shared_ptr<AuditLog> audit = nullptr);

}  // namespace phigrade
