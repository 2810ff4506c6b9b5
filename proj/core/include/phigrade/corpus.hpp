#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "phigrade/metrics.hpp"
#include "phigrade/pipeline.hpp"
#include "phigrade/taxonomy.hpp"

namespace phigrade {

enum class FileFormat {
  kJsonLines,    // .jsonl / .ndjson — canonical interchange format
  kDelimited,    // .csv (comma) / .tsv (tab)
  kSpreadsheet,  // .xlsx, first sheet
};

// Infers the format from the file extension.
std::optional<FileFormat> format_from_path(const std::filesystem::path& path);
std::string_view format_name(FileFormat format);
std::optional<FileFormat> parse_format(std::string_view name);

struct ColumnMap {
  std::string record_id = "record_id";
  std::string description = "Description";
};

struct CorpusFile {
  std::filesystem::path path;
  std::optional<FileFormat> format;  // inferred from the extension when absent
  ColumnMap columns;
};

// A header plus rows of string cells; the common shape of all three formats.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(std::string_view name) const;
};

// JSON-lines rows become columns in first-seen key order; non-string values
// are stored as compact JSON text.
Table read_table(const std::filesystem::path& path, std::optional<FileFormat> format = {});
void write_table(const std::filesystem::path& path, const Table& table,
                 std::optional<FileFormat> format = {});

// RFC 4180 style parsing/writing of one delimited document.
Table parse_delimited(std::string_view content, char delimiter);
std::string render_delimited(const Table& table, char delimiter);

// One record per row in row order. Missing or empty record ids become the
// zero-based row index; whitespace-only descriptions become empty; other
// columns pass through as metadata. Throws IoError naming the available
// columns when the description column is absent.
std::vector<ConsultationRecord> read_corpus(const CorpusFile& file);

// Seeded pool of synthetic Chinese full names.
class NamePool {
 public:
  explicit NamePool(std::uint64_t seed, std::size_t size = 256);
  NamePool(std::uint64_t seed, std::vector<std::string> names);

  std::uint64_t seed() const noexcept { return seed_; }
  const std::vector<std::string>& names() const noexcept { return names_; }

 private:
  std::uint64_t seed_;
  std::vector<std::string> names_;
};

// Default de-identification placeholder patterns (ECMAScript regexes).
const std::vector<std::string>& default_placeholder_patterns();

// Replaces placeholder occurrences, in text order, with names drawn from the
// pool by a generator keyed on (seed, record index). Names within one record
// are distinct while the pool lasts. Records without placeholders are left
// byte-identical.
std::vector<ConsultationRecord> fill_names(std::vector<ConsultationRecord> records,
                                           const NamePool& pool,
                                           const std::vector<std::string>& placeholder_patterns =
                                               default_placeholder_patterns());

// Result/gold rows: record_id, entity, category, level, rules_fired,
// category_label. A row with empty entity, category and level marks a record
// that has no triples.
inline const std::vector<std::string>& result_columns() {
  static const std::vector<std::string> kColumns = {"record_id", "entity",      "category",
                                                    "level",     "rules_fired", "category_label"};
  return kColumns;
}

struct ResultRow {
  std::string record_id;
  std::string entity;
  std::string category;
  nlohmann::json level;  // integer for valid rows; raw model value otherwise
  std::vector<std::string> rules_fired;
  std::string category_label;

  bool is_marker() const { return entity.empty() && category.empty() && level.is_null(); }
  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

std::vector<ResultRow> result_rows(const std::vector<RecordResult>& results, const Taxonomy& taxonomy);
void write_rows(const std::filesystem::path& path, const std::vector<ResultRow>& rows,
                std::optional<FileFormat> format = {});
std::vector<ResultRow> read_rows(const std::filesystem::path& path,
                                 std::optional<FileFormat> format = {});

// Writes one row per triple (plus rows for schema violations and a marker
// row for each record without any item).
void write_results(const std::vector<RecordResult>& results, const std::filesystem::path& path,
                   const Taxonomy& taxonomy, std::optional<FileFormat> format = {});

// Groups rows by record id in order of first appearance. Rows whose category
// or level falls outside the schema count as incompatible items.
std::vector<PredictedRecord> predictions_from_rows(const std::vector<ResultRow>& rows,
                                                   const Taxonomy& taxonomy);
std::vector<PredictedRecord> read_predictions(const std::filesystem::path& path,
                                              const Taxonomy& taxonomy,
                                              std::optional<FileFormat> format = {});

// Gold rows must be schema-valid and pairwise distinct per record.
std::vector<GoldRecord> gold_from_rows(const std::vector<ResultRow>& rows, const Taxonomy& taxonomy);
std::vector<GoldRecord> read_gold(const std::filesystem::path& path, const Taxonomy& taxonomy,
                                  std::optional<FileFormat> format = {});

}  // namespace phigrade
