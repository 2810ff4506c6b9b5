#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "phigrade/backend.hpp"
#include "phigrade/prompt.hpp"
#include "phigrade/rules.hpp"
#include "phigrade/taxonomy.hpp"
#include "phigrade/triple.hpp"
#include "phigrade/validator.hpp"

namespace phigrade {

struct ConsultationRecord {
  std::string record_id;
  std::string description;
  std::map<std::string, std::string> metadata;  // hospital, department, date, ...
};

// A slice of the input. Offsets count code points; `text` is the exact byte
// slice of the source.
struct TextChunk {
  std::string text;
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Splits long text into chunks of at most max_chunk_chars code points. Split
// points prefer positions just after 。！？!?；; or a newline; consecutive chunks
// overlap by at least overlap_chars (aligned back to a sentence start when one
// is near). Requires max_chunk_chars > overlap_chars.
std::vector<TextChunk> chunk(std::string_view description, std::size_t max_chunk_chars,
                             std::size_t overlap_chars);

// A model item that parsed as a prediction but fell outside the schema
// (bad_category / bad_level). Counted by the compatibility metric.
struct RawPrediction {
  std::string entity;
  std::string category;
  nlohmann::json level;

  friend bool operator==(const RawPrediction&, const RawPrediction&) = default;
};

struct RecordResult {
  std::string record_id;
  // De-duplicated; level descending, then entity, then category.
  std::vector<Triple> triples;
  // Parallel to `triples`: ids of rules that produced each triple.
  std::vector<std::vector<std::string>> triple_rules;
  std::optional<SensitivityLevel> max_level;
  std::vector<RuleDecision> rule_decisions;  // only decisions where a rule fired
  std::vector<RawPrediction> schema_violations;
  std::vector<Rejection> rejections;
  std::size_t chunk_count = 0;
  std::size_t rejection_count = 0;
  std::size_t parse_failures = 0;
  bool failed = false;
  std::string error;
};

struct ChunkingParams {
  std::size_t max_chunk_chars = 4000;
  std::size_t overlap_chars = 200;
};

struct PipelineContext {
  const Taxonomy* taxonomy = nullptr;
  const PromptBundle* bundle = nullptr;
  const CompletionClient* backend = nullptr;
  const RulePack* rules = nullptr;  // null disables the rule layer
  ChunkingParams chunking;
};

// Exact de-duplication on (entity, category, level) and risk ordering.
// Rule ids of merged duplicates are unioned.
void finalize_triples(RecordResult& result,
                      std::vector<std::pair<Triple, std::vector<std::string>>> collected);

// chunk -> render -> complete -> validate -> rules, per chunk in order; then
// merge. A backend failure on any chunk fails the whole record.
RecordResult process_record(const ConsultationRecord& record, const PipelineContext& ctx);

struct CorpusRun {
  std::vector<RecordResult> results;  // input order
  std::vector<std::string> failed_ids;
};

using ProgressFn = std::function<void(std::size_t done, std::size_t total, const RecordResult&)>;

// Processes records on up to `concurrency` worker threads. Record ids must be
// unique (ConfigError otherwise). Output order is input order.
CorpusRun process_corpus(const std::vector<ConsultationRecord>& records,
                         const PipelineContext& ctx, std::size_t concurrency = 1,
                         const ProgressFn& progress = {});

}  // namespace phigrade
