#pragma once

#include <filesystem>

#include "phigrade/rules.hpp"
#include "phigrade/taxonomy.hpp"

namespace phigrade::bench {

inline const Taxonomy& taxonomy() {
  static const Taxonomy t = load_taxonomy_file(std::filesystem::path(PHIGRADE_BENCH_DATA_DIR) / "taxonomy.json");
  return t;
}

inline const RulePack& rules() {
  static const RulePack r =
      load_rule_pack_file(std::filesystem::path(PHIGRADE_BENCH_DATA_DIR) / "rules.json", taxonomy());
  return r;
}

}  // namespace phigrade::bench
