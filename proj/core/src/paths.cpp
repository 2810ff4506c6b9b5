#include "phigrade/paths.hpp"

#include <cstdlib>
#include <string>
#include <vector>

#include "phigrade/error.hpp"

namespace phigrade {
namespace {

std::vector<std::filesystem::path> candidates() {
  std::vector<std::filesystem::path> dirs;
  if (const char* env = std::getenv("PHIGRADE_DATA_DIR"); env != nullptr && *env != '\0') {
    dirs.emplace_back(env);
  }
  dirs.emplace_back("data");
  dirs.emplace_back(PHIGRADE_SOURCE_DATA_DIR);
  dirs.emplace_back(PHIGRADE_INSTALL_DATA_DIR);
  return dirs;
}

}  // namespace

std::optional<std::filesystem::path> default_data_dir() {
  std::error_code ec;
  for (const auto& dir : candidates()) {
    if (std::filesystem::exists(dir / "taxonomy.json", ec)) return dir;
  }
  return std::nullopt;
}

std::filesystem::path data_file(std::string_view name) {
  std::error_code ec;
  for (const auto& dir : candidates()) {
    const auto path = dir / std::string(name);
    if (std::filesystem::exists(path, ec)) return path;
  }
  throw IoError("cannot locate bundled data file '" + std::string(name) +
                "'; set PHIGRADE_DATA_DIR or pass an explicit path");
}

}  // namespace phigrade
