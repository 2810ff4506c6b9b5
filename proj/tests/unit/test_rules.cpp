#include <doctest.h>

#include <nlohmann/json.hpp>

#include "phigrade/error.hpp"
#include "rule_cases.hpp"
#include "support.hpp"

using namespace phigrade;
using phigrade::testing::rules;
using phigrade::testing::taxonomy;
using phigrade::testing::triple;
using nlohmann::json;

TEST_CASE("curated cases") {
  const auto cases = phigrade::testing::curated_rule_cases();
  CHECK(cases.size() >= 50);
  for (const auto& c : cases) {
    const auto d = apply_rules(c.input, c.context, rules());
    CHECK_MESSAGE(d.triple_after == c.expected, c.name);
    CHECK(d.triple_before == c.input);
    CHECK(d.fired_rule_ids.empty() == (c.input == c.expected));
  }
}

TEST_CASE("reference examples") {
  auto d = apply_rules(triple("HPV16阳性", "test/exam result", 3), "检查发现HPV16阳性", rules());
  CHECK(d.triple_after == triple("HPV16阳性", "sensitive test result", 5));
  CHECK(d.fired_rule_ids == std::vector<std::string>{"hpv_high_risk_positive", "sensitive_test_floor"});

  d = apply_rules(triple("疑似肺结核", "special disease", 5), "医生怀疑是肺结核", rules());
  CHECK(d.triple_after == triple("疑似肺结核", "disease-suspected", 2));

  d = apply_rules(triple("头痛", "chief complaint", 2), "头痛", rules());
  CHECK(d.triple_after == d.triple_before);
  CHECK(d.fired_rule_ids.empty());
}

TEST_CASE("bundled pack holds exactly the 15 high-risk genotypes") {
  const auto& lists = rules().lists;
  const auto it = lists.find("hpv_genotypes");
  REQUIRE(it != lists.end());
  CHECK(it->second == std::vector<std::string>{"16", "18", "31", "33", "35", "39", "45", "51", "52",
                                               "56", "58", "59", "68", "73", "82"});
  for (std::size_t i = 1; i < rules().rules.size(); ++i) {
    CHECK(rules().rules[i - 1].priority > rules().rules[i].priority);
  }
  CHECK(rules().find("hpv_high_risk_positive") != nullptr);
  CHECK(rules().find("nope") == nullptr);
}

TEST_CASE("applying the pack twice changes nothing further") {
  for (const auto& c : phigrade::testing::curated_rule_cases()) {
    const auto once = apply_rules(c.input, c.context, rules());
    const auto twice = apply_rules(once.triple_after, c.context, rules());
    CHECK_MESSAGE(twice.triple_after == once.triple_after, c.name);
  }
}

TEST_CASE("empty pack is the identity") {
  const auto pack = load_rule_pack(json::object(), taxonomy());
  CHECK(pack.empty());
  const auto t = triple("HPV16阳性", "test/exam result", 3);
  const auto d = apply_rules(t, "HPV16阳性", pack);
  CHECK(d.triple_after == t);
  CHECK(d.fired_rule_ids.empty());
}

namespace {

json rule(std::string id, int priority) {
  return json{{"id", id},          {"priority", priority},           {"scope", "entity_text"},
              {"action", "promote_level"}, {"pattern", "x"}, {"target_level", 5}};
}

}  // namespace

TEST_CASE("loader errors") {
  CHECK_THROWS_AS(load_rule_pack(json{{"rules", {rule("a", 7), rule("b", 7)}}}, taxonomy()), ConfigError);
  CHECK_THROWS_AS(load_rule_pack(json{{"rules", {rule("a", 7), rule("a", 8)}}}, taxonomy()), ConfigError);
  auto bad = rule("a", 1);
  bad["pattern"] = "(";
  CHECK_THROWS_AS(load_rule_pack(json{{"rules", {bad}}}, taxonomy()), ConfigError);
  bad = rule("a", 1);
  bad["pattern"] = "${missing}";
  CHECK_THROWS_AS(load_rule_pack(json{{"rules", {bad}}}, taxonomy()), ConfigError);
  bad = rule("a", 1);
  bad["applies_to"] = {"favorite color"};
  CHECK_THROWS_AS(load_rule_pack(json{{"rules", {bad}}}, taxonomy()), ConfigError);
  bad = rule("a", 1);
  bad["action"] = "set_category_and_level";
  CHECK_THROWS_AS(load_rule_pack(json{{"rules", {bad}}}, taxonomy()), ConfigError);
  bad = rule("a", 1);
  bad["target_level"] = 7;
  CHECK_THROWS_AS(load_rule_pack(json{{"rules", {bad}}}, taxonomy()), ConfigError);
  CHECK_NOTHROW(load_rule_pack(json{{"rules", {rule("a", 1), rule("b", 2)}}}, taxonomy()));
}

TEST_CASE("list expansion escapes literals and prefers the longest") {
  const json doc = {
      {"lists", {{"k", {"a+", "a+b"}}}},
      {"rules",
       {{{"id", "r"},
         {"priority", 1},
         {"scope", "entity_text"},
         {"action", "set_category_and_level"},
         {"pattern", "^${k}$"},
         {"target_category", "disease"},
         {"target_level", 3}}}}};
  const auto pack = load_rule_pack(doc, taxonomy());
  CHECK(apply_rules(triple("a+b", "age", 1), "", pack).triple_after.category == "disease");
  CHECK(apply_rules(triple("a+", "age", 1), "", pack).triple_after.category == "disease");
  CHECK(apply_rules(triple("aab", "age", 1), "", pack).triple_after.category == "age");
}

TEST_CASE("context scope sees the whole window") {
  const json doc = {{"rules",
                     {{{"id", "ctx"},
                       {"priority", 1},
                       {"scope", "surrounding_context"},
                       {"action", "downgrade_level"},
                       {"pattern", "排除"},
                       {"target_level", 2}}}}};
  const auto pack = load_rule_pack(doc, taxonomy());
  CHECK(apply_rules(triple("梅毒", "special disease", 5), "已排除梅毒", pack).triple_after.level.value() == 2);
  CHECK(apply_rules(triple("梅毒", "special disease", 5), "确诊梅毒", pack).triple_after.level.value() == 5);
}
