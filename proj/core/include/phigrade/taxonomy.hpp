#pragma once

#include <compare>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace phigrade {

// Sensitivity grade 1 (public) .. 5 (special disease). Construction from any
// other integer throws.
class SensitivityLevel {
 public:
  static constexpr int kMin = 1;
  static constexpr int kMax = 5;

  explicit SensitivityLevel(int value);

  static std::optional<SensitivityLevel> from_int(long long value) noexcept;
  static bool valid(long long value) noexcept { return value >= kMin && value <= kMax; }

  int value() const noexcept { return value_; }

  friend auto operator<=>(const SensitivityLevel&, const SensitivityLevel&) = default;

 private:
  struct Unchecked {};
  SensitivityLevel(Unchecked, int value) noexcept : value_(value) {}
  int value_;
};

// The six top-level health data groups.
enum class Group {
  kPersonalAttribute,
  kHealthStatus,
  kMedicalApplication,
  kMedicalPayment,
  kHealthResource,
  kPublicHealth,
};

std::string_view group_name(Group group);
std::optional<Group> parse_group(std::string_view name);

struct Category {
  Group group;
  std::string slug;         // ASCII, normalized; the matching key
  std::string label;        // canonical Chinese display label
  std::string subcategory;  // e.g. "demographic", "test/exam"
};

struct TaxonomyEntry {
  Category category;
  SensitivityLevel default_level;
  std::string notes;
};

// The closed category vocabulary. Immutable after load and safe to share
// across threads.
//
// Document layout:
//   { "version": "...",
//     "groups": { "<group name>": [ {"slug", "label", "level",
//                                     "subcategory", "notes"}, ... ], ... } }
class Taxonomy {
 public:
  Taxonomy() = default;

  const std::vector<TaxonomyEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::string& version() const noexcept { return version_; }

  // True iff the normalized candidate is a known leaf slug.
  bool is_compatible(std::string_view candidate) const;

  // Entry for a candidate leaf (normalized first), or nullptr.
  const TaxonomyEntry* find(std::string_view candidate) const;

  // Throws ConfigError for leaves outside the vocabulary.
  SensitivityLevel default_level(std::string_view leaf) const;

  // Display label for a known slug; empty for unknown ones.
  std::string label_of(std::string_view slug) const;

  // Slugs in document order.
  std::vector<std::string> slugs() const;

 private:
  friend Taxonomy load_taxonomy(const nlohmann::json& doc);

  std::string version_;
  std::vector<TaxonomyEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Throws ConfigError on malformed documents, unknown groups, out-of-range
// levels, non-ASCII slugs and duplicate leaves.
Taxonomy load_taxonomy(const nlohmann::json& doc);
Taxonomy load_taxonomy_file(const std::filesystem::path& path);

}  // namespace phigrade
