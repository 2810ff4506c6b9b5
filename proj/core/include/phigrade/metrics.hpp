#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "phigrade/pipeline.hpp"
#include "phigrade/triple.hpp"

namespace phigrade {

struct GoldRecord {
  std::string record_id;
  std::vector<Triple> triples;
};

// Predictions for one record as the metrics see them: schema-compatible
// triples plus a count of items that fell outside the schema.
struct PredictedRecord {
  std::string record_id;
  std::vector<Triple> triples;
  std::size_t incompatible = 0;

  std::size_t item_count() const { return triples.size() + incompatible; }
};

PredictedRecord to_predicted(const RecordResult& result);

struct MatchSet {
  std::string record_id;
  std::vector<std::pair<Triple, Triple>> matched_pairs;  // (gold, predicted)
  std::vector<Triple> unmatched_gold;
  std::vector<Triple> unmatched_pred;
};

// Greedy injective matching on (normalized entity, category): each gold
// triple, in gold order, takes the first unmatched prediction with its key.
// Levels play no part, so changing a predicted level never re-pairs items.
MatchSet match_triples(const GoldRecord& gold, const PredictedRecord& predicted);

// A gold corpus with predictions aligned to it (same length, same order).
// Records absent from the predictions are represented by empty entries.
struct AlignedCorpus {
  std::vector<GoldRecord> gold;
  std::vector<PredictedRecord> predicted;
};

// Aligns predictions to gold by record id. Duplicate gold ids throw
// MetricError; predictions for unknown ids are counted in `orphans`.
AlignedCorpus align(std::vector<GoldRecord> gold, const std::vector<PredictedRecord>& predicted,
                    std::size_t* orphans = nullptr);

// Mean over records with gold triples of |predicted items| / |gold|.
double mcif(const AlignedCorpus& corpus);
// Mean over records with predicted items of compatible / all predicted items.
double mccr(const AlignedCorpus& corpus);
// Pooled level accuracy over matched pairs where either level is 3..5.
// Exposed as MSGR; the same quantity is sometimes written MSGQ.
double msgr(const AlignedCorpus& corpus);
// Micro-F1 of the per-record maximum level as a 5-class label. A record with
// no predicted triples counts as a false negative only.
double micro_f1_max_level(const AlignedCorpus& corpus);

struct RecordDiagnostics {
  std::string record_id;
  std::size_t gold_count = 0;
  std::size_t predicted_items = 0;
  std::size_t compatible_items = 0;
  std::size_t matched = 0;
  std::size_t graded_pairs = 0;   // matched pairs in the MSGR set
  std::size_t graded_correct = 0;
  std::optional<int> gold_max_level;
  std::optional<int> predicted_max_level;
};

struct MetricsReport {
  double mcif = 0;
  double mccr = 0;
  double msgr = 0;
  double micro_f1 = 0;
  std::size_t records = 0;
  std::size_t skipped_mcif = 0;      // empty gold
  std::size_t skipped_mccr = 0;      // no predicted items
  std::size_t skipped_micro_f1 = 0;  // empty gold
  std::size_t unpredicted_records = 0;
  std::size_t orphan_predictions = 0;
  std::vector<RecordDiagnostics> per_record;
};

// Throws MetricError when any of the four metrics is undefined.
MetricsReport evaluate(const AlignedCorpus& corpus);
MetricsReport evaluate(std::vector<GoldRecord> gold, const std::vector<PredictedRecord>& predicted);

nlohmann::json to_json(const MetricsReport& report, bool include_records = true);
std::string render_table(const MetricsReport& report);

}  // namespace phigrade
