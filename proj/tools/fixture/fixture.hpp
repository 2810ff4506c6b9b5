#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "phigrade/backend.hpp"
#include "phigrade/metrics.hpp"
#include "phigrade/pipeline.hpp"
#include "phigrade/rules.hpp"
#include "phigrade/taxonomy.hpp"

// Deterministic synthetic benchmark: consultation records, their gold triples
// and a per-chunk replay table whose responses reproduce the gold exactly.
namespace phigrade::fixture {

struct Options {
  std::uint64_t seed = 20200701;
  std::size_t records = 1000;
  // Every n-th record is padded past the chunk budget (0 disables).
  std::size_t long_record_every = 33;
  ChunkingParams chunking;
};

struct ReplayEntry {
  std::string record_id;
  std::string chunk_text;
  std::string response;
};

struct Fixture {
  std::vector<ConsultationRecord> records;
  std::vector<GoldRecord> gold;
  std::vector<ReplayEntry> replay_entries;  // record order, then chunk order

  ReplayTable replay_table() const;
};

// Builds the fixture and checks that the gold is a fixed point of the rule
// pack in every chunk it is replayed from (throws phigrade::Error if not).
Fixture make_fixture(const Options& options, const Taxonomy& taxonomy, const RulePack& rules);

// Writes corpus.jsonl, gold.jsonl and replay.jsonl into `dir`.
void write_fixture(const Fixture& fixture, const std::filesystem::path& dir,
                   const Taxonomy& taxonomy);

}  // namespace phigrade::fixture
