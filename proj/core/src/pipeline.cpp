#include "phigrade/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <set>
#include <thread>

#include "phigrade/text.hpp"

namespace phigrade {
namespace {

bool is_terminator(char32_t c) {
  switch (c) {
    case U'。':
    case U'！':
    case U'？':
    case U'；':
    case U'!':
    case U'?':
    case U';':
    case U'\n':
      return true;
    default:
      return false;
  }
}

void check_context(const PipelineContext& ctx) {
  if (ctx.taxonomy == nullptr || ctx.bundle == nullptr || ctx.backend == nullptr) {
    throw ConfigError("pipeline: taxonomy, prompt bundle and backend are required");
  }
  if (ctx.chunking.max_chunk_chars == 0 ||
      ctx.chunking.max_chunk_chars <= ctx.chunking.overlap_chars) {
    throw ConfigError("pipeline: max_chunk_chars must exceed overlap_chars");
  }
}

}  // namespace

std::vector<TextChunk> chunk(std::string_view description, std::size_t max_chunk_chars,
                             std::size_t overlap_chars) {
  if (max_chunk_chars == 0 || max_chunk_chars <= overlap_chars) {
    throw ConfigError("chunk: max_chunk_chars must exceed overlap_chars");
  }
  const auto offsets = text::code_point_offsets(description);
  const std::size_t n = offsets.size() - 1;
  if (n == 0) return {};
  auto slice = [&](std::size_t b, std::size_t e) {
    return TextChunk{std::string(description.substr(offsets[b], offsets[e] - offsets[b])), b, e};
  };
  if (n <= max_chunk_chars) return {slice(0, n)};

  const std::u32string cps = text::decode_utf8(description);
  // Position p (0 < p < n) is a boundary when the code point before it ends a
  // sentence or turn.
  auto boundary = [&](std::size_t p) { return p > 0 && p < n && is_terminator(cps[p - 1]); };

  std::vector<TextChunk> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t limit = start + max_chunk_chars;
    if (limit >= n) {
      out.push_back(slice(start, n));
      break;
    }
    // Latest boundary in the back half of the window, past the overlap.
    const std::size_t floor_end = std::max(start + overlap_chars + 1, start + max_chunk_chars / 2);
    std::size_t end = limit;
    for (std::size_t p = limit; p >= floor_end; --p) {
      if (boundary(p)) {
        end = p;
        break;
      }
    }
    out.push_back(slice(start, end));
    if (overlap_chars == 0) {
      start = end;
      continue;
    }
    // Step back at least overlap_chars, snapping to a sentence start within
    // another overlap_chars so the shared text holds whole sentences.
    const std::size_t target = end - overlap_chars;
    const std::size_t floor_start =
        std::max(start + 1, target > overlap_chars ? target - overlap_chars : std::size_t{0});
    std::size_t next = target;
    for (std::size_t p = target; p >= floor_start && p > start; --p) {
      if (boundary(p)) {
        next = p;
        break;
      }
    }
    start = next;
  }
  return out;
}

void finalize_triples(RecordResult& result,
                      std::vector<std::pair<Triple, std::vector<std::string>>> collected) {
  std::sort(collected.begin(), collected.end(),
            [](const auto& a, const auto& b) { return risk_order(a.first, b.first); });
  result.triples.clear();
  result.triple_rules.clear();
  for (auto& [triple, rules] : collected) {
    if (!result.triples.empty() && result.triples.back() == triple) {
      auto& merged = result.triple_rules.back();
      merged.insert(merged.end(), rules.begin(), rules.end());
    } else {
      result.triples.push_back(std::move(triple));
      result.triple_rules.push_back(std::move(rules));
    }
  }
  for (auto& ids : result.triple_rules) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  }
  result.max_level.reset();
  if (!result.triples.empty()) result.max_level = result.triples.front().level;
}

RecordResult process_record(const ConsultationRecord& record, const PipelineContext& ctx) {
  check_context(ctx);
  RecordResult result;
  result.record_id = record.record_id;
  const auto chunks =
      chunk(record.description, ctx.chunking.max_chunk_chars, ctx.chunking.overlap_chars);
  result.chunk_count = chunks.size();

  std::vector<std::pair<Triple, std::vector<std::string>>> collected;
  for (const auto& piece : chunks) {
    const auto messages = render_messages(*ctx.bundle, piece.text);
    CompletionResult completion;
    try {
      completion = ctx.backend->complete(messages, ctx.bundle->output_schema);
    } catch (const BackendError& e) {
      RecordResult failed;
      failed.record_id = record.record_id;
      failed.chunk_count = chunks.size();
      failed.failed = true;
      failed.error = std::string(error_kind_name(e.kind())) + ": " + e.what();
      return failed;
    }
    ValidationOutcome outcome = parse_and_validate(completion.raw_text, *ctx.taxonomy);
    if (outcome.parse_failed) ++result.parse_failures;
    for (auto& rejection : outcome.rejected) {
      if (rejection.reason == RejectReason::kBadCategory ||
          rejection.reason == RejectReason::kBadLevel) {
        const auto& item = rejection.item;
        const auto& category = item["category"];
        result.schema_violations.push_back(RawPrediction{
            item["entity"].get<std::string>(),
            category.is_string() ? category.get<std::string>()
                                 : category.dump(-1, ' ', false,
                                                 nlohmann::json::error_handler_t::replace),
            item.contains("level") ? item["level"] : nlohmann::json()});
      }
      result.rejections.push_back(std::move(rejection));
    }

    if (ctx.rules != nullptr && !ctx.rules->empty()) {
      const std::wstring wide_context = text::to_wide(piece.text);
      for (const auto& triple : outcome.accepted) {
        RuleDecision decision = apply_rules(triple, wide_context, *ctx.rules);
        collected.emplace_back(decision.triple_after, decision.fired_rule_ids);
        if (!decision.fired_rule_ids.empty()) result.rule_decisions.push_back(std::move(decision));
      }
    } else {
      for (auto& triple : outcome.accepted) collected.emplace_back(std::move(triple), std::vector<std::string>{});
    }
  }
  result.rejection_count = result.rejections.size();

  auto& raw = result.schema_violations;
  std::sort(raw.begin(), raw.end(), [](const RawPrediction& a, const RawPrediction& b) {
    return std::tie(a.entity, a.category) < std::tie(b.entity, b.category) ||
           (std::tie(a.entity, a.category) == std::tie(b.entity, b.category) &&
            a.level.dump() < b.level.dump());
  });
  raw.erase(std::unique(raw.begin(), raw.end()), raw.end());

  finalize_triples(result, std::move(collected));
  return result;
}

CorpusRun process_corpus(const std::vector<ConsultationRecord>& records,
                         const PipelineContext& ctx, std::size_t concurrency,
                         const ProgressFn& progress) {
  check_context(ctx);
  {
    std::set<std::string_view> seen;
    for (const auto& r : records) {
      if (!seen.insert(r.record_id).second) {
        throw ConfigError("pipeline: duplicate record id '" + r.record_id + "'");
      }
    }
  }
  CorpusRun run;
  run.results.resize(records.size());
  if (records.empty()) return run;

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= records.size()) return;
      RecordResult r;
      try {
        r = process_record(records[i], ctx);
      } catch (const std::exception& e) {
        r = RecordResult{};
        r.record_id = records[i].record_id;
        r.failed = true;
        r.error = e.what();
      }
      run.results[i] = std::move(r);
      const std::size_t finished = done.fetch_add(1) + 1;
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(finished, records.size(), run.results[i]);
      }
    }
  };

  const std::size_t threads = std::clamp<std::size_t>(concurrency, 1, records.size());
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& r : run.results) {
    if (r.failed) run.failed_ids.push_back(r.record_id);
  }
  return run;
}

}  // namespace phigrade
