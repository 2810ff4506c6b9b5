#include "phigrade/rules.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "phigrade/error.hpp"
#include "phigrade/text.hpp"

namespace phigrade {
namespace {

std::string expand_template(const std::string& source, const RulePack& pack,
                            const std::string& where) {
  std::string out;
  std::size_t i = 0;
  while (i < source.size()) {
    const std::size_t open = source.find("${", i);
    if (open == std::string::npos) {
      out.append(source, i, std::string::npos);
      break;
    }
    const std::size_t close = source.find('}', open);
    if (close == std::string::npos) throw ConfigError(where + ": unterminated ${ in pattern");
    out.append(source, i, open - i);
    const std::string name = source.substr(open + 2, close - open - 2);
    if (const auto list = pack.lists.find(name); list != pack.lists.end()) {
      std::vector<std::string> items = list->second;
      // Longest first so alternation prefers e.g. "精神分裂症" over "精神".
      std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        return text::decode_utf8(a).size() > text::decode_utf8(b).size();
      });
      out += "(?:";
      for (std::size_t k = 0; k < items.size(); ++k) {
        if (k > 0) out += '|';
        out += text::regex_escape(items[k]);
      }
      out += ')';
    } else if (const auto param = pack.params.find(name); param != pack.params.end()) {
      out += param->second;
    } else {
      throw ConfigError(where + ": pattern references unknown list or param '" + name + "'");
    }
    i = close + 1;
  }
  return out;
}

std::string canonical_slug(const Taxonomy& taxonomy, const std::string& candidate,
                           const std::string& where) {
  const TaxonomyEntry* entry = taxonomy.find(candidate);
  if (entry == nullptr) throw ConfigError(where + ": unknown category '" + candidate + "'");
  return entry->category.slug;
}

bool rule_matches(const OverrideRule& rule, const std::wstring& wide_entity,
                  const std::wstring& wide_context) {
  const std::wstring& subject =
      rule.scope == RuleScope::kEntityText ? wide_entity : wide_context;
  return std::regex_search(subject, *rule.compiled);
}

}  // namespace

std::string_view scope_name(RuleScope scope) {
  return scope == RuleScope::kEntityText ? "entity_text" : "surrounding_context";
}

std::string_view action_name(RuleAction action) {
  switch (action) {
    case RuleAction::kSetCategoryAndLevel:
      return "set_category_and_level";
    case RuleAction::kPromoteLevel:
      return "promote_level";
    case RuleAction::kDowngradeLevel:
      return "downgrade_level";
  }
  return "unknown";
}

bool OverrideRule::eligible(const Triple& triple) const {
  return applies_to.empty() ||
         std::find(applies_to.begin(), applies_to.end(), triple.category) != applies_to.end();
}

const OverrideRule* RulePack::find(std::string_view id) const {
  for (const auto& r : rules) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

RulePack load_rule_pack(const nlohmann::json& doc, const Taxonomy& taxonomy) {
  RulePack pack;
  if (doc.is_null()) return pack;
  if (!doc.is_object()) throw ConfigError("rule pack: document must be an object");
  pack.version = doc.value("version", std::string());

  if (const auto lists = doc.find("lists"); lists != doc.end()) {
    if (!lists->is_object()) throw ConfigError("rule pack: 'lists' must be an object");
    for (const auto& [name, items] : lists->items()) {
      if (!items.is_array()) throw ConfigError("rule pack: list '" + name + "' must be an array");
      auto& out = pack.lists[name];
      for (const auto& item : items) {
        if (!item.is_string() || item.get_ref<const std::string&>().empty()) {
          throw ConfigError("rule pack: list '" + name + "' holds a non-string or empty item");
        }
        out.push_back(item.get<std::string>());
      }
    }
  }
  if (const auto params = doc.find("params"); params != doc.end()) {
    if (!params->is_object()) throw ConfigError("rule pack: 'params' must be an object");
    for (const auto& [name, value] : params->items()) {
      pack.params[name] = value.is_string() ? value.get<std::string>() : value.dump();
    }
  }

  const auto rules = doc.find("rules");
  if (rules == doc.end()) return pack;
  if (!rules->is_array()) throw ConfigError("rule pack: 'rules' must be an array");

  std::set<int> priorities;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < rules->size(); ++i) {
    const auto& row = (*rules)[i];
    std::string where = "rule pack: rules[" + std::to_string(i) + "]";
    if (!row.is_object()) throw ConfigError(where + ": rule must be an object");
    OverrideRule rule;
    rule.id = row.value("id", std::string());
    if (rule.id.empty()) throw ConfigError(where + ": missing id");
    where += " (" + rule.id + ")";
    if (!ids.insert(rule.id).second) throw ConfigError(where + ": duplicate id");

    const auto priority = row.find("priority");
    if (priority == row.end() || !priority->is_number_integer()) {
      throw ConfigError(where + ": missing integer priority");
    }
    rule.priority = priority->get<int>();
    if (!priorities.insert(rule.priority).second) {
      throw ConfigError(where + ": duplicate priority " + std::to_string(rule.priority));
    }

    const std::string scope = row.value("scope", std::string("entity_text"));
    if (scope == "entity_text") {
      rule.scope = RuleScope::kEntityText;
    } else if (scope == "surrounding_context") {
      rule.scope = RuleScope::kSurroundingContext;
    } else {
      throw ConfigError(where + ": unknown scope '" + scope + "'");
    }

    const std::string action = row.value("action", std::string());
    if (action == "set_category_and_level") {
      rule.action = RuleAction::kSetCategoryAndLevel;
    } else if (action == "promote_level") {
      rule.action = RuleAction::kPromoteLevel;
    } else if (action == "downgrade_level") {
      rule.action = RuleAction::kDowngradeLevel;
    } else {
      throw ConfigError(where + ": unknown action '" + action + "'");
    }

    if (const auto target = row.find("target_category");
        target != row.end() && !target->is_null()) {
      if (!target->is_string()) throw ConfigError(where + ": target_category must be a string");
      rule.target_category = canonical_slug(taxonomy, target->get<std::string>(), where);
    }
    if (const auto target = row.find("target_level"); target != row.end() && !target->is_null()) {
      if (!target->is_number_integer()) throw ConfigError(where + ": target_level must be an integer");
      rule.target_level = SensitivityLevel::from_int(target->get<long long>());
      if (!rule.target_level) throw ConfigError(where + ": target_level out of range");
    }
    switch (rule.action) {
      case RuleAction::kSetCategoryAndLevel:
        if (!rule.target_category || !rule.target_level) {
          throw ConfigError(where + ": set_category_and_level needs target_category and target_level");
        }
        break;
      case RuleAction::kPromoteLevel:
        if (!rule.target_level) throw ConfigError(where + ": promote_level needs target_level");
        if (rule.target_category) {
          throw ConfigError(where + ": promote_level takes no target_category");
        }
        break;
      case RuleAction::kDowngradeLevel:
        if (!rule.target_level) throw ConfigError(where + ": downgrade_level needs target_level");
        break;
    }

    if (const auto applies = row.find("applies_to"); applies != row.end()) {
      if (!applies->is_array()) throw ConfigError(where + ": applies_to must be an array");
      for (const auto& slug : *applies) {
        if (!slug.is_string()) throw ConfigError(where + ": applies_to holds a non-string");
        rule.applies_to.push_back(canonical_slug(taxonomy, slug.get<std::string>(), where));
      }
    }

    rule.ignore_case = row.value("ignore_case", false);
    const auto pattern = row.find("pattern");
    if (pattern == row.end() || !pattern->is_string()) throw ConfigError(where + ": missing pattern");
    rule.pattern = expand_template(pattern->get<std::string>(), pack, where);
    auto flags = std::regex_constants::ECMAScript | std::regex_constants::optimize;
    if (rule.ignore_case) flags |= std::regex_constants::icase;
    try {
      rule.compiled = std::make_shared<const std::wregex>(text::to_wide(rule.pattern), flags);
    } catch (const std::regex_error& e) {
      throw ConfigError(where + ": pattern does not compile: " + e.what());
    }
    pack.rules.push_back(std::move(rule));
  }

  std::sort(pack.rules.begin(), pack.rules.end(),
            [](const OverrideRule& a, const OverrideRule& b) { return a.priority > b.priority; });
  return pack;
}

RulePack load_rule_pack_file(const std::filesystem::path& path, const Taxonomy& taxonomy) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open rule pack: " + path.string());
  const std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (text::trim(body).empty()) return RulePack{};
  const auto doc = nlohmann::json::parse(body, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("rule pack: malformed JSON in " + path.string());
  return load_rule_pack(doc, taxonomy);
}

RuleDecision apply_rules(const Triple& triple, std::string_view context_window,
                         const RulePack& pack) {
  if (pack.empty()) return RuleDecision{triple, triple, {}};
  return apply_rules(triple, text::to_wide(context_window), pack);
}

RuleDecision apply_rules(const Triple& triple, const std::wstring& wide_context,
                         const RulePack& pack) {
  RuleDecision decision{triple, triple, {}};
  if (pack.empty()) return decision;
  const std::wstring wide_entity = text::to_wide(triple.entity);

  auto first_match = [&](RuleAction action, const Triple& subject) -> const OverrideRule* {
    for (const auto& rule : pack.rules) {
      if (rule.action != action || !rule.eligible(subject)) continue;
      if (rule_matches(rule, wide_entity, wide_context)) return &rule;
    }
    return nullptr;
  };

  Triple& after = decision.triple_after;
  if (const OverrideRule* down = first_match(RuleAction::kDowngradeLevel, triple)) {
    if (down->target_category) after.category = *down->target_category;
    after.level = std::min(after.level, *down->target_level);
    decision.fired_rule_ids.push_back(down->id);
    return decision;
  }
  if (const OverrideRule* set = first_match(RuleAction::kSetCategoryAndLevel, triple)) {
    after.category = *set->target_category;
    after.level = *set->target_level;
    decision.fired_rule_ids.push_back(set->id);
  }
  if (const OverrideRule* promote = first_match(RuleAction::kPromoteLevel, after)) {
    after.level = std::max(after.level, *promote->target_level);
    decision.fired_rule_ids.push_back(promote->id);
  }
  return decision;
}

}  // namespace phigrade
