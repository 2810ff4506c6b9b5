#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "phigrade/taxonomy.hpp"
#include "phigrade/triple.hpp"

namespace phigrade {

struct AblationFlags {
  bool few_shot = true;
  bool schema = true;
  bool rules = true;  // consumed by the pipeline, not the prompt
};

struct Exemplar {
  std::string input_text;
  std::vector<Triple> expected_triples;
};

struct PromptBundle {
  std::string system_text;
  std::string task_text;
  std::string rules_text;
  std::vector<Exemplar> exemplars;
  std::optional<nlohmann::json> output_schema;
  AblationFlags ablation;
};

struct Message {
  std::string role;
  std::string content;

  friend bool operator==(const Message&, const Message&) = default;
};

// Structured-output schema: {"triples": [{entity, category, level}]} with the
// category enumerated over every leaf slug and level restricted to 1..5.
nlohmann::json output_schema(const Taxonomy& taxonomy);

// Canonical assistant-side rendering of a triple list; also the shape the
// stub backend replays.
std::string render_triples(const std::vector<Triple>& triples);

// Table digest generated from the loaded taxonomy.
std::string render_rules_text(const Taxonomy& taxonomy);

// Throws ConfigError for an empty taxonomy or an exemplar whose category is
// outside it. Exemplar order is preserved.
PromptBundle build_prompt(const Taxonomy& taxonomy, std::vector<Exemplar> exemplars,
                          AblationFlags flags);

// One JSON record per line: {"input_text": ..., "triples": [{entity, category,
// level}]}. Blank lines are skipped; errors name the 1-based line.
std::vector<Exemplar> load_exemplars(std::istream& in, const Taxonomy& taxonomy);
std::vector<Exemplar> load_exemplars_file(const std::filesystem::path& path,
                                          const Taxonomy& taxonomy);

// System turn, then each exemplar as a user/assistant pair, then the chunk
// verbatim as the final user turn.
std::vector<Message> render_messages(const PromptBundle& bundle, std::string_view input_chunk);

}  // namespace phigrade
