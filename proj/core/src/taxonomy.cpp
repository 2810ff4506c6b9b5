#include "phigrade/taxonomy.hpp"

#include <array>
#include <fstream>

#include <nlohmann/json.hpp>

#include "phigrade/error.hpp"
#include "phigrade/text.hpp"

namespace phigrade {
namespace {

constexpr std::array<std::pair<Group, std::string_view>, 6> kGroups{{
    {Group::kPersonalAttribute, "personal attribute"},
    {Group::kHealthStatus, "health status"},
    {Group::kMedicalApplication, "medical application"},
    {Group::kMedicalPayment, "medical payment"},
    {Group::kHealthResource, "health resource"},
    {Group::kPublicHealth, "public health"},
}};

bool is_ascii(std::string_view s) {
  for (unsigned char c : s) {
    if (c >= 0x80) return false;
  }
  return true;
}

std::string required_string(const nlohmann::json& row, const char* key, const std::string& where) {
  const auto it = row.find(key);
  if (it == row.end() || !it->is_string()) {
    throw ConfigError(where + ": missing string field '" + key + "'");
  }
  return it->get<std::string>();
}

}  // namespace

SensitivityLevel::SensitivityLevel(int value) : value_(value) {
  if (!valid(value)) {
    throw Error("sensitivity level out of range [1,5]: " + std::to_string(value));
  }
}

std::optional<SensitivityLevel> SensitivityLevel::from_int(long long value) noexcept {
  if (!valid(value)) return std::nullopt;
  return SensitivityLevel(Unchecked{}, static_cast<int>(value));
}

std::string_view group_name(Group group) {
  for (const auto& [g, name] : kGroups) {
    if (g == group) return name;
  }
  return "unknown";
}

std::optional<Group> parse_group(std::string_view name) {
  const std::string key = text::normalize_label(name);
  for (const auto& [g, n] : kGroups) {
    if (n == key) return g;
  }
  return std::nullopt;
}

bool Taxonomy::is_compatible(std::string_view candidate) const {
  return find(candidate) != nullptr;
}

const TaxonomyEntry* Taxonomy::find(std::string_view candidate) const {
  const auto it = index_.find(text::normalize_label(candidate));
  return it == index_.end() ? nullptr : &entries_[it->second];
}

SensitivityLevel Taxonomy::default_level(std::string_view leaf) const {
  const TaxonomyEntry* entry = find(leaf);
  if (entry == nullptr) {
    throw ConfigError("unknown category: '" + std::string(leaf) + "'");
  }
  return entry->default_level;
}

std::string Taxonomy::label_of(std::string_view slug) const {
  const TaxonomyEntry* entry = find(slug);
  return entry == nullptr ? std::string() : entry->category.label;
}

std::vector<std::string> Taxonomy::slugs() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.category.slug);
  return out;
}

Taxonomy load_taxonomy(const nlohmann::json& doc) {
  Taxonomy tax;
  if (doc.is_null()) return tax;
  if (!doc.is_object()) throw ConfigError("taxonomy: document must be an object");
  if (const auto v = doc.find("version"); v != doc.end() && v->is_string()) {
    tax.version_ = v->get<std::string>();
  }
  const auto groups = doc.find("groups");
  if (groups == doc.end()) return tax;
  if (!groups->is_object()) throw ConfigError("taxonomy: 'groups' must be an object");

  // nlohmann::json objects iterate in key order; keep the canonical group order
  // instead so prompts and schemas list leaves the same way the table does.
  for (const auto& [group, group_key] : kGroups) {
    (void)group_key;
    for (const auto& [name, rows] : groups->items()) {
      const auto parsed = parse_group(name);
      if (!parsed) throw ConfigError("taxonomy: unknown top-level group '" + name + "'");
      if (*parsed != group) continue;
      if (!rows.is_array()) throw ConfigError("taxonomy: group '" + name + "' must be a list");
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        const std::string where = "taxonomy: " + name + "[" + std::to_string(i) + "]";
        if (!row.is_object()) throw ConfigError(where + ": leaf must be an object");
        const std::string raw_slug = required_string(row, "slug", where);
        const std::string slug = text::normalize_label(raw_slug);
        if (slug.empty()) throw ConfigError(where + ": empty slug");
        if (!is_ascii(slug)) throw ConfigError(where + ": slug must be ASCII: '" + raw_slug + "'");
        const auto level = row.find("level");
        if (level == row.end() || !level->is_number_integer()) {
          throw ConfigError(where + ": missing integer 'level'");
        }
        const auto checked = SensitivityLevel::from_int(level->get<long long>());
        if (!checked) {
          throw ConfigError(where + ": level out of range: " + level->dump());
        }
        if (tax.index_.contains(slug)) {
          throw ConfigError(where + ": duplicate leaf '" + slug + "'");
        }
        TaxonomyEntry entry{
            Category{group, slug, row.value("label", std::string()),
                     row.value("subcategory", std::string())},
            *checked, row.value("notes", std::string())};
        tax.index_.emplace(slug, tax.entries_.size());
        tax.entries_.push_back(std::move(entry));
      }
    }
  }
  return tax;
}

Taxonomy load_taxonomy_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open taxonomy file: " + path.string());
  const std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (text::trim(body).empty()) return Taxonomy{};
  nlohmann::json doc = nlohmann::json::parse(body, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("taxonomy: malformed JSON in " + path.string());
  return load_taxonomy(doc);
}

}  // namespace phigrade
