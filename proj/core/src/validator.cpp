#include "phigrade/validator.hpp"

#include "phigrade/text.hpp"

namespace phigrade {
namespace {

std::optional<nlohmann::json> try_parse(std::string_view s) {
  auto doc = nlohmann::json::parse(s.begin(), s.end(), nullptr, false);
  if (doc.is_discarded()) return std::nullopt;
  return doc;
}

// End index (exclusive) of the balanced bracket group opening at `begin`,
// honouring JSON string literals. npos when unbalanced.
std::size_t balanced_end(std::string_view s, std::size_t begin) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = begin; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    switch (c) {
      case '"':
        in_string = true;
        break;
      case '[':
      case '{':
        ++depth;
        break;
      case ']':
      case '}':
        if (--depth == 0) return i + 1;
        if (depth < 0) return std::string_view::npos;
        break;
      default:
        break;
    }
  }
  return std::string_view::npos;
}

std::optional<std::string_view> fenced_block(std::string_view s) {
  const std::size_t open = s.find("```");
  if (open == std::string_view::npos) return std::nullopt;
  std::size_t body = s.find('\n', open);
  if (body == std::string_view::npos) return std::nullopt;
  ++body;
  const std::size_t close = s.find("```", body);
  if (close == std::string_view::npos) return s.substr(body);
  return s.substr(body, close - body);
}

// Unwraps the accepted envelopes into a list of candidate items.
std::optional<nlohmann::json> items_of(const nlohmann::json& doc) {
  // in_place: json converts implicitly to too many types for plain return.
  using Items = std::optional<nlohmann::json>;
  if (doc.is_array()) return Items(std::in_place, doc);
  if (!doc.is_object()) return std::nullopt;
  if (const auto it = doc.find("triples"); it != doc.end() && it->is_array()) return Items(std::in_place, *it);
  if (doc.contains("entity")) return nlohmann::json::array({doc});
  const nlohmann::json* only_array = nullptr;
  for (const auto& [key, value] : doc.items()) {
    (void)key;
    if (value.is_array()) {
      if (only_array != nullptr) return std::nullopt;
      only_array = &value;
    }
  }
  if (only_array != nullptr) return Items(std::in_place, *only_array);
  return std::nullopt;
}

}  // namespace

std::string_view reason_name(RejectReason reason) {
  switch (reason) {
    case RejectReason::kBadCategory:
      return "bad_category";
    case RejectReason::kBadLevel:
      return "bad_level";
    case RejectReason::kEmptyEntity:
      return "empty_entity";
    case RejectReason::kMalformedItem:
      return "malformed_item";
  }
  return "unknown";
}

std::size_t ValidationOutcome::schema_violations() const {
  std::size_t n = 0;
  for (const auto& r : rejected) {
    if (r.reason == RejectReason::kBadCategory || r.reason == RejectReason::kBadLevel) ++n;
  }
  return n;
}

std::optional<nlohmann::json> extract_json_payload(std::string_view raw_text) {
  const std::string trimmed = text::trim(raw_text);
  // A reply that is itself a JSON document is taken as is: its nested values
  // are never searched for something that happens to look like a list.
  if (auto doc = try_parse(trimmed)) return items_of(*doc) ? doc : std::nullopt;
  if (const auto fenced = fenced_block(trimmed)) {
    if (auto doc = try_parse(*fenced)) return items_of(*doc) ? doc : std::nullopt;
  }
  // Scan for an embedded array or object. Bounded so pathological input
  // stays linear-ish.
  std::string_view s = trimmed;
  int attempts = 0;
  for (std::size_t i = 0; i < s.size() && attempts < 64; ++i) {
    if (s[i] != '[' && s[i] != '{') continue;
    ++attempts;
    const std::size_t end = balanced_end(s, i);
    if (end == std::string_view::npos) continue;
    if (auto doc = try_parse(s.substr(i, end - i))) {
      if (items_of(*doc)) return doc;
      i = end - 1;  // skip the whole value rather than its members
    }
  }
  return std::nullopt;
}

ValidationOutcome parse_and_validate(std::string_view raw_text, const Taxonomy& taxonomy) {
  ValidationOutcome out;
  const auto doc = extract_json_payload(raw_text);
  const auto items = doc ? items_of(*doc) : std::nullopt;
  if (!items) {
    out.parse_failed = true;
    return out;
  }
  for (const auto& item : *items) {
    if (!item.is_object()) {
      out.rejected.push_back({item, RejectReason::kMalformedItem});
      continue;
    }
    const auto entity = item.find("entity");
    if (entity == item.end() || !entity->is_string()) {
      out.rejected.push_back({item, RejectReason::kMalformedItem});
      continue;
    }
    const auto& entity_text = entity->get_ref<const std::string&>();
    if (text::trim(entity_text).empty()) {
      out.rejected.push_back({item, RejectReason::kEmptyEntity});
      continue;
    }
    const auto category = item.find("category");
    const TaxonomyEntry* entry = nullptr;
    if (category != item.end() && category->is_string()) {
      entry = taxonomy.find(category->get_ref<const std::string&>());
    }
    if (entry == nullptr) {
      out.rejected.push_back({item, RejectReason::kBadCategory});
      continue;
    }
    const auto level = item.find("level");
    std::optional<SensitivityLevel> checked;
    if (level != item.end() && level->is_number_integer()) {
      checked = SensitivityLevel::from_int(level->get<long long>());
    }
    if (!checked) {
      out.rejected.push_back({item, RejectReason::kBadLevel});
      continue;
    }
    out.accepted.push_back(Triple{entity_text, entry->category.slug, *checked});
  }
  return out;
}

}  // namespace phigrade
