#include <doctest.h>

#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "phigrade/error.hpp"
#include "support.hpp"

using namespace phigrade;
using phigrade::testing::taxonomy;

TEST_CASE("bundled taxonomy shape") {
  const auto& t = taxonomy();
  CHECK(t.size() == 108);
  std::map<Group, int> per_group;
  for (const auto& e : t.entries()) ++per_group[e.category.group];
  CHECK(per_group[Group::kPersonalAttribute] == 41);
  CHECK(per_group[Group::kHealthStatus] == 16);
  CHECK(per_group[Group::kMedicalApplication] == 28);
  CHECK(per_group[Group::kMedicalPayment] == 7);
  CHECK(per_group[Group::kHealthResource] == 10);
  CHECK(per_group[Group::kPublicHealth] == 6);
  std::set<std::string> slugs;
  for (const auto& s : t.slugs()) slugs.insert(s);
  CHECK(slugs.size() == t.size());
}

TEST_CASE("compatibility queries") {
  const auto& t = taxonomy();
  CHECK(t.is_compatible("patient name"));
  CHECK(t.is_compatible("PATIENT NAME "));
  CHECK_FALSE(t.is_compatible("favorite movie"));
  CHECK_FALSE(t.is_compatible(""));
}

TEST_CASE("default levels") {
  const auto& t = taxonomy();
  CHECK(t.default_level("patient name").value() == 4);
  CHECK(t.default_level("chief complaint").value() == 2);
  CHECK(t.default_level("special disease").value() == 5);
  CHECK(t.default_level("doctor name").value() == 4);
  CHECK(t.default_level("hospital basic data / organization type").value() == 1);
  CHECK(t.default_level("address-district").value() == 3);
  CHECK(t.default_level("address-city").value() == 2);
  CHECK_THROWS_AS(t.default_level("favorite movie"), ConfigError);
  CHECK_FALSE(t.label_of("patient name").empty());
  CHECK(t.label_of("nope").empty());
}

TEST_CASE("sensitivity level bounds") {
  CHECK_THROWS(SensitivityLevel(0));
  CHECK_THROWS(SensitivityLevel(6));
  CHECK(SensitivityLevel::from_int(3).has_value());
  CHECK_FALSE(SensitivityLevel::from_int(9).has_value());
  CHECK(SensitivityLevel(2) < SensitivityLevel(5));
}

TEST_CASE("group names round trip") {
  for (auto g : {Group::kPersonalAttribute, Group::kHealthStatus, Group::kMedicalApplication,
                 Group::kMedicalPayment, Group::kHealthResource, Group::kPublicHealth}) {
    CHECK(parse_group(group_name(g)) == g);
  }
  CHECK_FALSE(parse_group("finance").has_value());
}

TEST_CASE("loader rejects malformed documents") {
  using nlohmann::json;
  auto leaf = [](std::string slug, int level) {
    return json{{"slug", slug}, {"label", "x"}, {"level", level}};
  };
  CHECK(load_taxonomy(json{{"version", "t"}, {"groups", json::object()}}).empty());
  CHECK_THROWS_AS(load_taxonomy(json{{"groups", {{"finance", json::array({leaf("a", 1)})}}}}),
                  ConfigError);
  CHECK_THROWS_AS(
      load_taxonomy(json{{"groups", {{"personal attribute", json::array({leaf("a", 6)})}}}}),
      ConfigError);
  CHECK_THROWS_AS(load_taxonomy(json{{"groups",
                                      {{"personal attribute", json::array({leaf("a", 1), leaf("A ", 2)})}}}}),
                  ConfigError);
  CHECK_THROWS_AS(
      load_taxonomy(json{{"groups", {{"personal attribute", json::array({leaf("姓名", 4)})}}}}),
      ConfigError);
  CHECK_THROWS_AS(load_taxonomy(json::array()), ConfigError);
}
