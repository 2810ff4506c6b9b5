#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "phigrade/prompt.hpp"
#include "phigrade/rules.hpp"
#include "phigrade/taxonomy.hpp"
#include "phigrade/triple.hpp"

namespace phigrade::testing {

inline std::filesystem::path data_dir() { return PHIGRADE_TEST_DATA_DIR; }
inline std::filesystem::path golden_dir() { return PHIGRADE_TEST_GOLDEN_DIR; }
inline std::filesystem::path test_data_dir() { return PHIGRADE_TEST_FILES_DIR; }

inline const Taxonomy& taxonomy() {
  static const Taxonomy t = load_taxonomy_file(data_dir() / "taxonomy.json");
  return t;
}

inline const RulePack& rules() {
  static const RulePack p = load_rule_pack_file(data_dir() / "rules.json", taxonomy());
  return p;
}

inline std::vector<Exemplar> exemplars() {
  return load_exemplars_file(data_dir() / "exemplars.jsonl", taxonomy());
}

inline Triple triple(std::string entity, std::string category, int level) {
  return Triple{std::move(entity), std::move(category), SensitivityLevel(level)};
}

inline std::string read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

inline void write_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << bytes;
}

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("phigrade-test-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace phigrade::testing
