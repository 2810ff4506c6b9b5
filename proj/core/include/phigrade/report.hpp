#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "phigrade/triple.hpp"

namespace phigrade {

struct DistributionEntry {
  std::string category;  // leaf slug, or "other" for the remainder bucket
  std::size_t count = 0;
  double share = 0;  // within-level

  friend bool operator==(const DistributionEntry&, const DistributionEntry&) = default;
};

struct LevelDistribution {
  SensitivityLevel level{1};
  // Top entries by count descending, slug ascending on ties; an "other"
  // bucket, when present, comes last.
  std::vector<DistributionEntry> entries;
  std::size_t total = 0;
};

inline constexpr std::string_view kOtherBucket = "other";

// Counts (category, level) occurrences and keeps the top_k categories per
// level plus an "other" remainder. One distribution per level present,
// highest level first.
std::vector<LevelDistribution> stratify(const std::vector<Triple>& triples, std::size_t top_k = 10);

// Delimited table `level,category,count,share` (share printed with 6
// decimals). Byte-identical for identical input.
std::string render_plot_data(const std::vector<LevelDistribution>& distributions);
void emit_plot_data(const std::vector<LevelDistribution>& distributions,
                    const std::filesystem::path& path);

nlohmann::json to_json(const std::vector<LevelDistribution>& distributions);

}  // namespace phigrade
