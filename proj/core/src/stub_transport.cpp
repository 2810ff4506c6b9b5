#include <istream>
#include <thread>

#include "phigrade/backend.hpp"
#include "phigrade/text.hpp"

namespace phigrade {
namespace {

std::string key_of(const nlohmann::json& row, const std::string& where) {
  if (const auto fp = row.find("fingerprint"); fp != row.end() && fp->is_string()) {
    return fp->get<std::string>();
  }
  if (const auto input = row.find("input"); input != row.end() && input->is_string()) {
    return text::fingerprint(input->get_ref<const std::string&>());
  }
  throw ConfigError(where + ": needs 'fingerprint' or 'input'");
}

FaultKind parse_fault_kind(const std::string& name, const std::string& where) {
  if (name == "transient_errors") return FaultKind::kTransientErrors;
  if (name == "permanent_error") return FaultKind::kPermanentError;
  if (name == "malformed_json") return FaultKind::kMalformedJson;
  if (name == "out_of_vocabulary") return FaultKind::kOutOfVocabulary;
  if (name == "out_of_range_level") return FaultKind::kOutOfRangeLevel;
  if (name == "replace_response") return FaultKind::kReplaceResponse;
  throw ConfigError(where + ": unknown fault kind '" + name + "'");
}

// Rewrites one item of a replayed triple list. Falls back to the raw text when
// the replay is not a list we understand.
std::string mutate_item(const std::string& replay, std::size_t index,
                        const std::function<void(nlohmann::json&)>& edit) {
  auto doc = nlohmann::json::parse(replay, nullptr, false);
  if (doc.is_discarded()) return replay;
  nlohmann::json* list = nullptr;
  if (doc.is_array()) {
    list = &doc;
  } else if (doc.is_object() && doc.contains("triples") && doc["triples"].is_array()) {
    list = &doc["triples"];
  }
  if (list == nullptr || index >= list->size()) return replay;
  edit((*list)[index]);
  return doc.dump();
}

}  // namespace

ReplayTable load_replay_table(std::istream& in) {
  ReplayTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const std::string where = "replay line " + std::to_string(line_no);
    const auto row = nlohmann::json::parse(line, nullptr, false);
    if (row.is_discarded() || !row.is_object()) throw ConfigError(where + ": not a JSON object");
    const auto response = row.find("response");
    if (response == row.end() || !response->is_string()) {
      throw ConfigError(where + ": needs a string 'response'");
    }
    const std::string key = key_of(row, where);
    const auto [it, inserted] = table.emplace(key, response->get<std::string>());
    if (!inserted && it->second != response->get_ref<const std::string&>()) {
      throw ConfigError(where + ": fingerprint " + key + " already maps to a different response");
    }
  }
  return table;
}

FaultPlan load_fault_plan(std::istream& in) {
  FaultPlan plan;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const std::string where = "fault plan line " + std::to_string(line_no);
    const auto row = nlohmann::json::parse(line, nullptr, false);
    if (row.is_discarded() || !row.is_object()) throw ConfigError(where + ": not a JSON object");
    Fault f;
    f.kind = parse_fault_kind(row.value("kind", std::string()), where);
    f.count = row.value("count", 1);
    f.item_index = row.value("item_index", std::size_t{0});
    f.level = row.value("level", 9LL);
    f.text = row.value("text", std::string());
    plan[key_of(row, where)] = f;
  }
  return plan;
}

StubTransport::StubTransport(ReplayTable replay, FaultPlan faults,
                             std::chrono::milliseconds simulated_latency)
    : replay_(std::move(replay)), faults_(std::move(faults)), latency_(simulated_latency) {}

std::size_t StubTransport::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

AttemptResult StubTransport::send(const ChatRequest& request) {
  std::string input;
  for (auto it = request.messages.rbegin(); it != request.messages.rend(); ++it) {
    if (it->role == "user") {
      input = it->content;
      break;
    }
  }
  const std::string key = text::fingerprint(input);
  if (latency_.count() > 0) std::this_thread::sleep_for(latency_);

  AttemptResult r;
  const Fault* fault = nullptr;
  {
    std::lock_guard lock(mutex_);
    ++calls_;
    if (const auto f = faults_.find(key); f != faults_.end()) {
      fault = &f->second;
      if (fault->kind == FaultKind::kTransientErrors && transient_served_[key] < fault->count) {
        ++transient_served_[key];
        r.status = AttemptStatus::kTransient;
        r.http_status = 429;
        r.error = "scripted transient failure";
        return r;
      }
    }
  }
  if (fault != nullptr && fault->kind == FaultKind::kPermanentError) {
    r.status = AttemptStatus::kTransient;
    r.http_status = 503;
    r.error = "scripted permanent failure";
    return r;
  }

  const auto hit = replay_.find(key);
  if (hit == replay_.end()) {
    r.status = AttemptStatus::kReplayMiss;
    r.error = "no replay entry for input fingerprint " + key;
    return r;
  }
  r.status = AttemptStatus::kOk;
  r.http_status = 200;
  r.text = hit->second;
  if (fault == nullptr) return r;
  switch (fault->kind) {
    case FaultKind::kMalformedJson:
      r.text = r.text.substr(0, r.text.size() / 2);
      if (r.text == hit->second) r.text = "{\"triples\": [";
      break;
    case FaultKind::kOutOfVocabulary:
      r.text = mutate_item(r.text, fault->item_index,
                           [](nlohmann::json& item) { item["category"] = "favorite color"; });
      break;
    case FaultKind::kOutOfRangeLevel: {
      const long long level = fault->level;
      r.text = mutate_item(r.text, fault->item_index,
                           [level](nlohmann::json& item) { item["level"] = level; });
      break;
    }
    case FaultKind::kReplaceResponse:
      r.text = fault->text;
      break;
    case FaultKind::kTransientErrors:
    case FaultKind::kPermanentError:
      break;
  }
  return r;
}

std::shared_ptr<CompletionClient> make_stub_backend(ReplayTable replay, FaultPlan faults,
                                                    BackendConfig config) {
  if (config.provider_name.empty()) config.provider_name = "stub";
  config.provider_kind = "stub";
  if (config.endpoint_url.empty()) config.endpoint_url = "stub://replay";
  config.api_key_env_var.clear();
  return std::make_shared<CompletionClient>(
      std::move(config), std::make_shared<StubTransport>(std::move(replay), std::move(faults)),
      [](std::chrono::milliseconds) {});
}

}  // namespace phigrade
