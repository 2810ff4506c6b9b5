#include "phigrade/metrics.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "phigrade/error.hpp"
#include "phigrade/text.hpp"

namespace phigrade {
namespace {

using MatchKey = std::pair<std::string, std::string>;

MatchKey key_of(const Triple& t) { return {text::normalize_label(t.entity), t.category}; }

bool graded(int level) { return level >= 3; }

std::optional<int> max_level(const std::vector<Triple>& triples) {
  std::optional<int> best;
  for (const auto& t : triples) {
    if (!best || t.level.value() > *best) best = t.level.value();
  }
  return best;
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

PredictedRecord to_predicted(const RecordResult& result) {
  return PredictedRecord{result.record_id, result.triples, result.schema_violations.size()};
}

MatchSet match_triples(const GoldRecord& gold, const PredictedRecord& predicted) {
  MatchSet out;
  out.record_id = gold.record_id;
  // Predictions not yet taken, indexed by key in prediction order.
  std::map<MatchKey, std::vector<std::size_t>> open;
  for (std::size_t j = 0; j < predicted.triples.size(); ++j) {
    open[key_of(predicted.triples[j])].push_back(j);
  }
  std::map<MatchKey, std::size_t> cursor;
  std::vector<bool> taken(predicted.triples.size(), false);
  for (const auto& g : gold.triples) {
    const auto key = key_of(g);
    const auto it = open.find(key);
    auto& next = cursor[key];
    if (it == open.end() || next == it->second.size()) {
      out.unmatched_gold.push_back(g);
      continue;
    }
    const std::size_t j = it->second[next++];
    taken[j] = true;
    out.matched_pairs.emplace_back(g, predicted.triples[j]);
  }
  for (std::size_t j = 0; j < predicted.triples.size(); ++j) {
    if (!taken[j]) out.unmatched_pred.push_back(predicted.triples[j]);
  }
  return out;
}

AlignedCorpus align(std::vector<GoldRecord> gold, const std::vector<PredictedRecord>& predicted,
                    std::size_t* orphans) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (!index.emplace(gold[i].record_id, i).second) {
      throw MetricError("duplicate gold record id '" + gold[i].record_id + "'");
    }
  }
  AlignedCorpus out;
  out.predicted.resize(gold.size());
  for (std::size_t i = 0; i < gold.size(); ++i) out.predicted[i].record_id = gold[i].record_id;
  std::size_t orphan_count = 0;
  for (const auto& p : predicted) {
    const auto it = index.find(p.record_id);
    if (it == index.end()) {
      ++orphan_count;
      continue;
    }
    auto& slot = out.predicted[it->second];
    slot.triples.insert(slot.triples.end(), p.triples.begin(), p.triples.end());
    slot.incompatible += p.incompatible;
  }
  if (orphans != nullptr) *orphans = orphan_count;
  out.gold = std::move(gold);
  return out;
}

double mcif(const AlignedCorpus& corpus) {
  double sum = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < corpus.gold.size(); ++i) {
    const auto gold_count = corpus.gold[i].triples.size();
    if (gold_count == 0) continue;
    sum += static_cast<double>(corpus.predicted[i].item_count()) / static_cast<double>(gold_count);
    ++n;
  }
  if (n == 0) throw MetricError("MCIF undefined: no record has gold triples");
  return sum / static_cast<double>(n);
}

double mccr(const AlignedCorpus& corpus) {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& p : corpus.predicted) {
    const auto items = p.item_count();
    if (items == 0) continue;
    sum += static_cast<double>(p.triples.size()) / static_cast<double>(items);
    ++n;
  }
  if (n == 0) throw MetricError("MCCR undefined: no record has predicted items");
  return sum / static_cast<double>(n);
}

double msgr(const AlignedCorpus& corpus) {
  std::size_t correct = 0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < corpus.gold.size(); ++i) {
    for (const auto& [g, p] : match_triples(corpus.gold[i], corpus.predicted[i]).matched_pairs) {
      if (!graded(g.level.value()) && !graded(p.level.value())) continue;
      ++total;
      if (g.level == p.level) ++correct;
    }
  }
  if (total == 0) throw MetricError("MSGR undefined: no matched pair at level 3-5");
  return static_cast<double>(correct) / static_cast<double>(total);
}

double micro_f1_max_level(const AlignedCorpus& corpus) {
  std::array<std::size_t, 6> tp{}, fp{}, fn{};
  std::size_t n = 0;
  for (std::size_t i = 0; i < corpus.gold.size(); ++i) {
    const auto gold_label = max_level(corpus.gold[i].triples);
    if (!gold_label) continue;
    ++n;
    const auto pred_label = max_level(corpus.predicted[i].triples);
    if (!pred_label) {
      ++fn[*gold_label];
    } else if (*pred_label == *gold_label) {
      ++tp[*gold_label];
    } else {
      ++fp[*pred_label];
      ++fn[*gold_label];
    }
  }
  if (n == 0) throw MetricError("micro-F1 undefined: no record has gold triples");
  std::size_t TP = 0, FP = 0, FN = 0;
  for (int l = SensitivityLevel::kMin; l <= SensitivityLevel::kMax; ++l) {
    TP += tp[l];
    FP += fp[l];
    FN += fn[l];
  }
  const double precision = TP + FP == 0 ? 0.0 : static_cast<double>(TP) / static_cast<double>(TP + FP);
  const double recall = TP + FN == 0 ? 0.0 : static_cast<double>(TP) / static_cast<double>(TP + FN);
  if (precision + recall == 0) return 0.0;
  return 2 * precision * recall / (precision + recall);
}

MetricsReport evaluate(const AlignedCorpus& corpus) {
  if (corpus.gold.size() != corpus.predicted.size()) {
    throw MetricError("gold and predictions are not aligned");
  }
  MetricsReport report;
  report.records = corpus.gold.size();
  report.mcif = mcif(corpus);
  report.mccr = mccr(corpus);
  report.msgr = msgr(corpus);
  report.micro_f1 = micro_f1_max_level(corpus);
  for (std::size_t i = 0; i < corpus.gold.size(); ++i) {
    const auto& g = corpus.gold[i];
    const auto& p = corpus.predicted[i];
    RecordDiagnostics d;
    d.record_id = g.record_id;
    d.gold_count = g.triples.size();
    d.predicted_items = p.item_count();
    d.compatible_items = p.triples.size();
    const auto matches = match_triples(g, p);
    d.matched = matches.matched_pairs.size();
    for (const auto& [gt, pt] : matches.matched_pairs) {
      if (!graded(gt.level.value()) && !graded(pt.level.value())) continue;
      ++d.graded_pairs;
      if (gt.level == pt.level) ++d.graded_correct;
    }
    d.gold_max_level = max_level(g.triples);
    d.predicted_max_level = max_level(p.triples);
    if (d.gold_count == 0) {
      ++report.skipped_mcif;
      ++report.skipped_micro_f1;
    }
    if (d.predicted_items == 0) {
      ++report.skipped_mccr;
      ++report.unpredicted_records;
    }
    report.per_record.push_back(std::move(d));
  }
  return report;
}

MetricsReport evaluate(std::vector<GoldRecord> gold, const std::vector<PredictedRecord>& predicted) {
  std::size_t orphans = 0;
  const auto corpus = align(std::move(gold), predicted, &orphans);
  auto report = evaluate(corpus);
  report.orphan_predictions = orphans;
  return report;
}

nlohmann::json to_json(const MetricsReport& report, bool include_records) {
  nlohmann::json doc = {
      {"mcif", report.mcif},
      {"mccr", report.mccr},
      {"msgr", report.msgr},
      {"micro_f1", report.micro_f1},
      {"records", report.records},
      {"skipped", {{"mcif", report.skipped_mcif},
                   {"mccr", report.skipped_mccr},
                   {"micro_f1", report.skipped_micro_f1}}},
      {"unpredicted_records", report.unpredicted_records},
      {"orphan_predictions", report.orphan_predictions},
  };
  if (include_records) {
    auto rows = nlohmann::json::array();
    for (const auto& d : report.per_record) {
      nlohmann::json row = {{"record_id", d.record_id},
                            {"gold", d.gold_count},
                            {"predicted", d.predicted_items},
                            {"compatible", d.compatible_items},
                            {"matched", d.matched},
                            {"graded_pairs", d.graded_pairs},
                            {"graded_correct", d.graded_correct}};
      row["gold_max_level"] = d.gold_max_level ? nlohmann::json(*d.gold_max_level) : nlohmann::json();
      row["predicted_max_level"] =
          d.predicted_max_level ? nlohmann::json(*d.predicted_max_level) : nlohmann::json();
      rows.push_back(std::move(row));
    }
    doc["per_record"] = std::move(rows);
  }
  return doc;
}

std::string render_table(const MetricsReport& report) {
  std::ostringstream out;
  out << "metric     value   skipped\n";
  out << "MCIF       " << fixed(report.mcif) << "  " << report.skipped_mcif << "\n";
  out << "MCCR       " << fixed(report.mccr) << "  " << report.skipped_mccr << "\n";
  out << "MSGR       " << fixed(report.msgr) << "  -\n";
  out << "micro-F1   " << fixed(report.micro_f1) << "  " << report.skipped_micro_f1 << "\n";
  out << "records: " << report.records << ", without predictions: " << report.unpredicted_records
      << ", orphan predictions: " << report.orphan_predictions << "\n";
  return out.str();
}

}  // namespace phigrade
