#include "phigrade/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>

#include "phigrade/error.hpp"

namespace phigrade {
namespace {

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\n\r") == std::string::npos) return value;
  std::string out = "\"";
  for (const char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::vector<LevelDistribution> stratify(const std::vector<Triple>& triples, std::size_t top_k) {
  if (top_k == 0) throw ConfigError("top_k must be positive");
  std::map<int, std::map<std::string, std::size_t>> counts;
  for (const auto& t : triples) ++counts[t.level.value()][t.category];

  std::vector<LevelDistribution> out;
  for (auto level = counts.rbegin(); level != counts.rend(); ++level) {
    LevelDistribution dist{SensitivityLevel(level->first), {}, 0};
    std::vector<std::pair<std::string, std::size_t>> ranked(level->second.begin(), level->second.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    for (const auto& [_, n] : ranked) dist.total += n;
    std::size_t rest = 0;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      if (i < top_k) {
        dist.entries.push_back({ranked[i].first, ranked[i].second, 0.0});
      } else {
        rest += ranked[i].second;
      }
    }
    if (rest > 0) dist.entries.push_back({std::string(kOtherBucket), rest, 0.0});
    for (auto& e : dist.entries) {
      e.share = static_cast<double>(e.count) / static_cast<double>(dist.total);
    }
    out.push_back(std::move(dist));
  }
  return out;
}

std::string render_plot_data(const std::vector<LevelDistribution>& distributions) {
  std::string out = "level,category,count,share\n";
  for (const auto& d : distributions) {
    for (const auto& e : d.entries) {
      char share[32];
      std::snprintf(share, sizeof share, "%.6f", e.share);
      out += std::to_string(d.level.value()) + "," + csv_field(e.category) + "," +
             std::to_string(e.count) + "," + share + "\n";
    }
  }
  return out;
}

void emit_plot_data(const std::vector<LevelDistribution>& distributions,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  const std::string data = render_plot_data(distributions);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

nlohmann::json to_json(const std::vector<LevelDistribution>& distributions) {
  auto doc = nlohmann::json::array();
  for (const auto& d : distributions) {
    auto entries = nlohmann::json::array();
    for (const auto& e : d.entries) {
      entries.push_back({{"category", e.category}, {"count", e.count}, {"share", e.share}});
    }
    doc.push_back({{"level", d.level.value()}, {"total", d.total}, {"entries", std::move(entries)}});
  }
  return doc;
}

}  // namespace phigrade
