#include <doctest.h>

#include <sstream>

#include "phigrade/report.hpp"
#include "support.hpp"

using namespace phigrade;
using phigrade::testing::triple;

TEST_CASE("share of a dominant level-2 category") {
  std::vector<Triple> triples;
  for (int i = 0; i < 3536; ++i) triples.push_back(triple("c" + std::to_string(i), "chief complaint", 2));
  for (int i = 0; i < 11499 - 3536; ++i) {
    triples.push_back(triple("d" + std::to_string(i), i % 3 == 0 ? "disease-suspected" : i % 3 == 1 ? "address-city" : "age", 2));
  }
  const auto dist = stratify(triples);
  REQUIRE(dist.size() == 1);
  CHECK(dist[0].total == 11499);
  CHECK(dist[0].entries[0].category == "chief complaint");
  CHECK(dist[0].entries[0].count == 3536);
  CHECK(dist[0].entries[0].share == doctest::Approx(3536.0 / 11499.0));
  CHECK(dist[0].entries[0].share == doctest::Approx(0.3075).epsilon(0.0005));
}

TEST_CASE("single triple") {
  const auto dist = stratify({triple("乳腺癌", "special disease", 5)});
  REQUIRE(dist.size() == 1);
  CHECK(dist[0].level.value() == 5);
  REQUIRE(dist[0].entries.size() == 1);
  CHECK(dist[0].entries[0] == DistributionEntry{"special disease", 1, 1.0});
}

TEST_CASE("top_k bucketing and ordering") {
  const std::vector<Triple> t = {triple("a", "age", 3), triple("b", "age", 3), triple("c", "age", 3),
                                 triple("d", "address-district", 3), triple("e", "address-district", 3),
                                 triple("f", "employer", 3), triple("g", "patient name", 4)};
  auto dist = stratify(t, 1);
  REQUIRE(dist.size() == 2);
  CHECK(dist[0].level.value() == 4);
  CHECK(dist[1].level.value() == 3);
  REQUIRE(dist[1].entries.size() == 2);
  CHECK(dist[1].entries[0] == DistributionEntry{"age", 3, 0.5});
  CHECK(dist[1].entries[1] == DistributionEntry{std::string(kOtherBucket), 3, 0.5});

  dist = stratify({triple("x", "employer", 3), triple("y", "age", 3)}, 10);
  REQUIRE(dist[0].entries.size() == 2);
  CHECK(dist[0].entries[0].category == "age");  // ties: slug ascending
  CHECK_THROWS(stratify(t, 0));
}

TEST_CASE("plot data") {
  CHECK(render_plot_data(stratify({})) == "level,category,count,share\n");
  const std::vector<Triple> t = {triple("a", "age", 3), triple("b", "hospital basic data / address", 1),
                                 triple("c", "age", 3), triple("d", "employer", 3)};
  const auto text = render_plot_data(stratify(t));
  CHECK(text ==
        "level,category,count,share\n"
        "3,age,2,0.666667\n"
        "3,employer,1,0.333333\n"
        "1,hospital basic data / address,1,1.000000\n");
  CHECK(render_plot_data(stratify(t)) == text);

  // Five levels with many categories stay within the row bound.
  std::vector<Triple> many;
  const auto slugs = phigrade::testing::taxonomy().slugs();
  for (int level = 1; level <= 5; ++level) {
    for (std::size_t i = 0; i < slugs.size(); ++i) many.push_back(triple(std::to_string(i), slugs[i], level));
  }
  const auto dist = stratify(many, 10);
  std::size_t rows = 0;
  for (const auto& d : dist) rows += d.entries.size();
  CHECK(rows == 55);

  phigrade::testing::TempDir dir;
  emit_plot_data(dist, dir / "plot.csv");
  CHECK(phigrade::testing::read_bytes(dir / "plot.csv") == render_plot_data(dist));
  const auto j = to_json(dist);
  CHECK(j.size() == 5);
}
