#pragma once

#include <compare>
#include <string>
#include <tuple>

#include "phigrade/taxonomy.hpp"

namespace phigrade {

// One extracted (entity, category, level) item. `category` holds the
// canonical leaf slug; `entity` is the span exactly as the model emitted it.
struct Triple {
  std::string entity;
  std::string category;
  SensitivityLevel level{1};

  friend bool operator==(const Triple&, const Triple&) = default;
};

// Key order used for exact de-duplication.
inline auto dedup_key(const Triple& t) {
  return std::tie(t.entity, t.category, t.level);
}

// Risk ordering: level descending, then entity codepoint order, then slug.
// UTF-8 byte order coincides with codepoint order.
inline bool risk_order(const Triple& a, const Triple& b) {
  if (a.level != b.level) return a.level > b.level;
  if (a.entity != b.entity) return a.entity < b.entity;
  return a.category < b.category;
}

}  // namespace phigrade
