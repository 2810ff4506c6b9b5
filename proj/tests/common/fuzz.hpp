#pragma once

// Raw-text generator for validator fuzzing: random bytes, mutated replies and
// grammar-built JSON with hostile values. Deterministic for a given seed.

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "phigrade/taxonomy.hpp"
#include "phigrade/text.hpp"
#include "phigrade/validator.hpp"

namespace phigrade::testing::fuzz {

class Generator {
 public:
  Generator(std::uint64_t seed, const Taxonomy& taxonomy) : rng_(seed), slugs_(taxonomy.slugs()) {}

  std::string next() {
    switch (pick(5)) {
      case 0:
        return random_bytes();
      case 1:
        return mutate(json_reply());
      case 2:
        return "好的，结果如下：\n```json\n" + json_reply() + "\n```\n以上。";
      default:
        return json_reply();
    }
  }

 private:
  std::size_t pick(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }

  std::string random_bytes() {
    std::string s(pick(200), '\0');
    for (auto& c : s) c = static_cast<char>(rng_() & 0xff);
    return s;
  }

  std::string mutate(std::string s) {
    const auto edits = 1 + pick(6);
    for (std::size_t i = 0; i < edits && !s.empty(); ++i) {
      const auto at = pick(s.size());
      switch (pick(4)) {
        case 0:
          s.erase(at, 1 + pick(8));
          break;
        case 1:
          s.insert(at, 1, "[]{}\",:\\\n"[pick(9)]);
          break;
        case 2:
          s[at] = static_cast<char>(rng_() & 0xff);
          break;
        default:
          s = s.substr(0, at);
          break;
      }
    }
    return s;
  }

  std::string entity() {
    static const std::vector<std::string> kEntities = {
        "张某", "HPV16阳性", "", "   ", "乳腺癌", "\\u0000", "a\\\"b", "ＡＢＣ", "13800138000", "\\ud83d\\ude00"};
    return "\"" + kEntities[pick(kEntities.size())] + "\"";
  }

  std::string category() {
    switch (pick(6)) {
      case 0:
        return "\"favorite color\"";
      case 1:
        return "\"PATIENT NAME \"";
      case 2:
        return std::to_string(static_cast<int>(pick(10)));
      case 3:
        return "null";
      default:
        return "\"" + slugs_[pick(slugs_.size())] + "\"";
    }
  }

  std::string level() {
    static const std::vector<std::string> kLevels = {"1",  "2",   "3",    "4",     "5",    "0",   "6",
                                                     "-1", "9",   "4.0",  "\"4\"", "null", "true",
                                                     "1e2", "99999999999999999999", "[3]"};
    return kLevels[pick(kLevels.size())];
  }

  std::string item() {
    switch (pick(8)) {
      case 0:
        return "42";
      case 1:
        return "\"text\"";
      case 2:
        return "{\"category\":" + category() + "}";
      default: {
        std::string s = "{";
        std::vector<std::string> fields = {"\"entity\":" + entity(), "\"category\":" + category(),
                                           "\"level\":" + level()};
        std::shuffle(fields.begin(), fields.end(), rng_);
        const auto keep = pick(4) == 0 ? pick(3) : 3;
        for (std::size_t i = 0; i < keep; ++i) s += (i ? "," : "") + fields[i];
        return s + "}";
      }
    }
  }

  std::string json_reply() {
    std::string items = "[";
    const auto n = pick(6);
    for (std::size_t i = 0; i < n; ++i) items += (i ? "," : "") + item();
    items += "]";
    switch (pick(4)) {
      case 0:
        return "{\"triples\":" + items + "}";
      case 1:
        return "{\"items\":" + items + ",\"note\":\"x\"}";
      case 2:
        return "Here you go: " + items + " thanks";
      default:
        return items;
    }
  }

  std::mt19937_64 rng_;
  std::vector<std::string> slugs_;
};

// Invariants every accepted triple must satisfy; returns the violated one or
// an empty string.
inline std::string check_outcome(const ValidationOutcome& out, const Taxonomy& taxonomy) {
  if (out.parse_failed && (!out.accepted.empty() || !out.rejected.empty())) {
    return "parse failure with items";
  }
  for (const auto& t : out.accepted) {
    if (text::trim(t.entity).empty()) return "empty entity accepted";
    const auto* entry = taxonomy.find(t.category);
    if (entry == nullptr || entry->category.slug != t.category) return "non-canonical category accepted";
    if (!SensitivityLevel::valid(t.level.value())) return "level out of range accepted";
  }
  return {};
}

}  // namespace phigrade::testing::fuzz
