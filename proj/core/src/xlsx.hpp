#pragma once

#include <filesystem>
#include <string>
#include <vector>

// Minimal .xlsx support: the first worksheet as a grid of strings. Enough for
// single-table corpus and result files; formatting, formulas and multiple
// sheets are out of scope.
namespace phigrade::xlsx {

using Grid = std::vector<std::vector<std::string>>;

// Reads the first sheet of the workbook. Rows are padded to equal width.
Grid read_first_sheet(const std::filesystem::path& path);

// Writes a single-sheet workbook with inline string cells. Output bytes are a
// pure function of `rows`.
void write_sheet(const std::filesystem::path& path, const Grid& rows);

}  // namespace phigrade::xlsx
