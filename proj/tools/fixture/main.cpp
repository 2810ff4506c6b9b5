#include <iostream>

#include <CLI11.hpp>

#include "fixture.hpp"
#include "phigrade/error.hpp"
#include "phigrade/paths.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic consultation benchmark (corpus, gold, replay table)"};
  std::string out_dir;
  std::string taxonomy_path;
  std::string rules_path;
  phigrade::fixture::Options options;
  app.add_option("-o,--out", out_dir, "Output directory")->required();
  app.add_option("-n,--records", options.records, "Number of records")->capture_default_str();
  app.add_option("--seed", options.seed, "Generator seed")->capture_default_str();
  app.add_option("--long-every", options.long_record_every,
                 "Pad every n-th record past the chunk budget (0 disables)")
      ->capture_default_str();
  app.add_option("--max-chunk-chars", options.chunking.max_chunk_chars)->capture_default_str();
  app.add_option("--overlap-chars", options.chunking.overlap_chars)->capture_default_str();
  app.add_option("--taxonomy", taxonomy_path, "Taxonomy JSON (default: bundled)");
  app.add_option("--rules", rules_path, "Rule pack JSON (default: bundled)");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto taxonomy = phigrade::load_taxonomy_file(
        taxonomy_path.empty() ? phigrade::data_file("taxonomy.json") : std::filesystem::path(taxonomy_path));
    const auto rules = phigrade::load_rule_pack_file(
        rules_path.empty() ? phigrade::data_file("rules.json") : std::filesystem::path(rules_path),
        taxonomy);
    const auto fx = phigrade::fixture::make_fixture(options, taxonomy, rules);
    phigrade::fixture::write_fixture(fx, out_dir, taxonomy);
    std::cerr << "wrote " << fx.records.size() << " records and " << fx.replay_entries.size()
              << " replay entries to " << out_dir << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
