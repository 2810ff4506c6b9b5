#pragma once

#include <filesystem>
#include <optional>
#include <string_view>

namespace phigrade {

// Directory holding the bundled taxonomy, rule pack and exemplars. Search
// order: $PHIGRADE_DATA_DIR, ./data, the source tree, the install prefix.
std::optional<std::filesystem::path> default_data_dir();

// `name` inside default_data_dir(); throws IoError when no directory has it.
std::filesystem::path data_file(std::string_view name);

}  // namespace phigrade
