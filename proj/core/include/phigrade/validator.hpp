#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "phigrade/taxonomy.hpp"
#include "phigrade/triple.hpp"

namespace phigrade {

enum class RejectReason {
  kBadCategory,
  kBadLevel,
  kEmptyEntity,
  kMalformedItem,
};

std::string_view reason_name(RejectReason reason);

struct Rejection {
  nlohmann::json item;
  RejectReason reason;
};

struct ValidationOutcome {
  std::vector<Triple> accepted;
  std::vector<Rejection> rejected;
  bool parse_failed = false;

  // Items that were well-formed predictions but fell outside the schema
  // (unknown category or level outside [1,5]).
  std::size_t schema_violations() const;
};

// Locates the JSON payload in a model reply. Accepts a bare document, a
// fenced ```json block, or the first balanced array/object embedded in prose.
std::optional<nlohmann::json> extract_json_payload(std::string_view raw_text);

// Parses the reply and validates each item independently. Never throws on
// model output; total parse failure sets parse_failed.
ValidationOutcome parse_and_validate(std::string_view raw_text, const Taxonomy& taxonomy);

}  // namespace phigrade
