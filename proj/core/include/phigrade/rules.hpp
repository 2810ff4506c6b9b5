#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "phigrade/taxonomy.hpp"
#include "phigrade/triple.hpp"

namespace phigrade {

enum class RuleScope { kEntityText, kSurroundingContext };

enum class RuleAction { kSetCategoryAndLevel, kPromoteLevel, kDowngradeLevel };

std::string_view scope_name(RuleScope scope);
std::string_view action_name(RuleAction action);

struct OverrideRule {
  std::string id;
  std::string pattern;  // after ${list}/${param} expansion
  RuleScope scope = RuleScope::kEntityText;
  RuleAction action = RuleAction::kSetCategoryAndLevel;
  std::optional<std::string> target_category;
  std::optional<SensitivityLevel> target_level;
  int priority = 0;
  bool ignore_case = false;
  // Canonical slugs the rule may rewrite; empty means every category.
  std::vector<std::string> applies_to;

  std::shared_ptr<const std::wregex> compiled;

  bool eligible(const Triple& triple) const;
};

// Rules are held in descending priority; priorities are unique.
struct RulePack {
  std::string version;
  std::vector<OverrideRule> rules;
  std::map<std::string, std::vector<std::string>> lists;
  std::map<std::string, std::string> params;

  bool empty() const noexcept { return rules.empty(); }
  const OverrideRule* find(std::string_view id) const;
};

struct RuleDecision {
  Triple triple_before;
  Triple triple_after;
  std::vector<std::string> fired_rule_ids;
};

// Document layout:
//   { "version": "...",
//     "lists":  { "<name>": ["literal", ...] },
//     "params": { "<name>": <scalar> },
//     "rules":  [ { "id", "priority", "scope", "action", "pattern",
//                   "ignore_case", "applies_to", "target_category",
//                   "target_level" } ] }
// Patterns may reference ${list} (escaped alternation, longest first) and
// ${param}. Throws ConfigError on compile failures, duplicate priorities or
// ids, unknown categories and missing action targets.
RulePack load_rule_pack(const nlohmann::json& doc, const Taxonomy& taxonomy);
RulePack load_rule_pack_file(const std::filesystem::path& path, const Taxonomy& taxonomy);

// Evaluates the pack against one triple. The first eligible, matching rule of
// each action class is selected. A downgrade suppresses set/promote rules;
// otherwise set_category_and_level applies, then promote_level on the result.
RuleDecision apply_rules(const Triple& triple, std::string_view context_window,
                         const RulePack& pack);

// Same, with the context already widened (the pipeline reuses one chunk for
// every triple it yielded).
RuleDecision apply_rules(const Triple& triple, const std::wstring& wide_context,
                         const RulePack& pack);

}  // namespace phigrade
