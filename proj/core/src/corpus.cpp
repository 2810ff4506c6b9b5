#include "phigrade/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include "phigrade/error.hpp"
#include "phigrade/text.hpp"
#include "xlsx.hpp"

namespace phigrade {
namespace {

using ordered_json = nlohmann::ordered_json;

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

FileFormat resolve_format(const std::filesystem::path& path, std::optional<FileFormat> format) {
  if (format) return *format;
  if (const auto inferred = format_from_path(path)) return *inferred;
  throw IoError("cannot infer file format of " + path.string() +
                " (expected .jsonl, .ndjson, .csv, .tsv or .xlsx)");
}

char delimiter_for(const std::filesystem::path& path) {
  return lower_extension(path) == ".tsv" ? '\t' : ',';
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

std::string strip_bom(std::string s) {
  if (s.rfind("\xEF\xBB\xBF", 0) == 0) s.erase(0, 3);
  return s;
}

std::string cell_text(const ordered_json& value) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_null()) return std::string();
  return value.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

Table table_from_grid(std::vector<std::vector<std::string>> grid) {
  Table table;
  if (grid.empty()) return table;
  table.header = std::move(grid.front());
  if (!table.header.empty()) table.header.front() = strip_bom(table.header.front());
  for (std::size_t i = 1; i < grid.size(); ++i) {
    auto& row = grid[i];
    if (std::all_of(row.begin(), row.end(), [](const std::string& c) { return c.empty(); })) continue;
    row.resize(std::max(row.size(), table.header.size()));
    table.rows.push_back(std::move(row));
  }
  return table;
}

Table read_jsonl_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<ordered_json> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) line = strip_bom(line);
    if (text::trim(line).empty()) continue;
    auto doc = ordered_json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
      throw IoError(path.string() + " line " + std::to_string(line_no) + ": not a JSON object");
    }
    docs.push_back(std::move(doc));
  }
  Table table;
  std::map<std::string, std::size_t> index;
  for (const auto& doc : docs) {
    for (const auto& [key, _] : doc.items()) {
      if (index.emplace(key, table.header.size()).second) table.header.push_back(key);
    }
  }
  for (const auto& doc : docs) {
    std::vector<std::string> row(table.header.size());
    for (const auto& [key, value] : doc.items()) row[index.at(key)] = cell_text(value);
    table.rows.push_back(std::move(row));
  }
  return table;
}

// Level cells in delimited/spreadsheet files: empty → null, integer text →
// integer, other numbers → number, anything else stays text.
nlohmann::json level_from_cell(const std::string& cell) {
  static const std::regex kInteger(R"(^\s*[+-]?[0-9]+\s*$)");
  if (text::trim(cell).empty()) return nullptr;
  if (std::regex_match(cell, kInteger)) {
    try {
      return std::stoll(cell);
    } catch (const std::out_of_range&) {
      return cell;
    }
  }
  const auto parsed = nlohmann::json::parse(cell, nullptr, false);
  if (!parsed.is_discarded() && parsed.is_number()) return parsed;
  return cell;
}

std::string level_to_cell(const nlohmann::json& level) {
  if (level.is_null()) return std::string();
  if (level.is_string()) return level.get<std::string>();
  return level.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

std::vector<std::string> split_rules(const std::string& cell) {
  std::vector<std::string> out;
  std::string current;
  std::istringstream in(cell);
  while (std::getline(in, current, ';')) {
    current = text::trim(current);
    if (!current.empty()) out.push_back(current);
  }
  return out;
}

std::string join_rules(const std::vector<std::string>& ids) {
  std::string out;
  for (const auto& id : ids) {
    if (!out.empty()) out += ';';
    out += id;
  }
  return out;
}

std::optional<Triple> valid_triple(const ResultRow& row, const Taxonomy& taxonomy) {
  if (text::trim(row.entity).empty()) return std::nullopt;
  const TaxonomyEntry* entry = taxonomy.find(row.category);
  if (entry == nullptr) return std::nullopt;
  if (!row.level.is_number_integer()) return std::nullopt;
  const auto level = SensitivityLevel::from_int(row.level.get<long long>());
  if (!level) return std::nullopt;
  return Triple{row.entity, entry->category.slug, *level};
}

std::uint32_t low32(std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xFFFFFFFFu); }
std::uint32_t high32(std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); }

}  // namespace

std::optional<FileFormat> format_from_path(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".jsonl" || ext == ".ndjson") return FileFormat::kJsonLines;
  if (ext == ".csv" || ext == ".tsv") return FileFormat::kDelimited;
  if (ext == ".xlsx") return FileFormat::kSpreadsheet;
  return std::nullopt;
}

std::string_view format_name(FileFormat format) {
  switch (format) {
    case FileFormat::kJsonLines: return "jsonl";
    case FileFormat::kDelimited: return "csv";
    case FileFormat::kSpreadsheet: return "xlsx";
  }
  return "unknown";
}

std::optional<FileFormat> parse_format(std::string_view name) {
  if (name == "jsonl" || name == "ndjson") return FileFormat::kJsonLines;
  if (name == "csv" || name == "tsv" || name == "delimited") return FileFormat::kDelimited;
  if (name == "xlsx" || name == "spreadsheet") return FileFormat::kSpreadsheet;
  return std::nullopt;
}

std::optional<std::size_t> Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (text::trim(header[i]) == text::trim(name)) return i;
  }
  return std::nullopt;
}

Table parse_delimited(std::string_view content, char delimiter) {
  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> row;
  std::string cell;
  bool quoted = false;
  bool row_has_content = false;
  auto end_cell = [&] {
    row.push_back(std::move(cell));
    cell.clear();
  };
  auto end_row = [&] {
    end_cell();
    if (row_has_content || row.size() > 1 || !row.front().empty()) grid.push_back(std::move(row));
    row.clear();
    row_has_content = false;
  };
  for (std::size_t i = 0; i < content.size(); ++i) {
    const char c = content[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      row_has_content = true;
    } else if (c == delimiter) {
      end_cell();
    } else if (c == '\r' && i + 1 < content.size() && content[i + 1] == '\n') {
      continue;
    } else if (c == '\n') {
      end_row();
    } else {
      cell.push_back(c);
    }
  }
  if (quoted) throw IoError("delimited file: unterminated quoted field");
  if (!cell.empty() || !row.empty() || row_has_content) end_row();
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!grid.empty() && grid[i].size() > grid.front().size()) {
      throw IoError("delimited file: row " + std::to_string(i + 1) + " has more cells than the header");
    }
  }
  return table_from_grid(std::move(grid));
}

std::string render_delimited(const Table& table, char delimiter) {
  auto field = [&](const std::string& value) {
    const bool quote = value.find_first_of(std::string{delimiter, '"', '\n', '\r'}) != std::string::npos ||
                       (!value.empty() && (value.front() == ' ' || value.back() == ' '));
    if (!quote) return value;
    std::string out = "\"";
    for (const char c : value) {
      if (c == '"') out += '"';
      out += c;
    }
    return out + "\"";
  };
  std::string out;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out += delimiter;
      out += field(row[i]);
    }
    out += '\n';
  };
  emit(table.header);
  for (const auto& row : table.rows) emit(row);
  return out;
}

Table read_table(const std::filesystem::path& path, std::optional<FileFormat> format) {
  switch (resolve_format(path, format)) {
    case FileFormat::kJsonLines:
      return read_jsonl_table(path);
    case FileFormat::kDelimited:
      return parse_delimited(read_file(path), delimiter_for(path));
    case FileFormat::kSpreadsheet:
      return table_from_grid(xlsx::read_first_sheet(path));
  }
  throw IoError("unsupported format");
}

void write_table(const std::filesystem::path& path, const Table& table,
                 std::optional<FileFormat> format) {
  switch (resolve_format(path, format)) {
    case FileFormat::kJsonLines: {
      std::string out;
      for (const auto& row : table.rows) {
        ordered_json doc = ordered_json::object();
        for (std::size_t i = 0; i < table.header.size(); ++i) {
          doc[table.header[i]] = i < row.size() ? row[i] : std::string();
        }
        out += doc.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
        out += '\n';
      }
      write_file(path, out);
      return;
    }
    case FileFormat::kDelimited:
      write_file(path, render_delimited(table, delimiter_for(path)));
      return;
    case FileFormat::kSpreadsheet: {
      xlsx::Grid grid;
      grid.push_back(table.header);
      grid.insert(grid.end(), table.rows.begin(), table.rows.end());
      xlsx::write_sheet(path, grid);
      return;
    }
  }
}

std::vector<ConsultationRecord> read_corpus(const CorpusFile& file) {
  const Table table = read_table(file.path, file.format);
  const auto description = table.column(file.columns.description);
  if (!description) {
    std::string available;
    for (const auto& name : table.header) {
      if (!available.empty()) available += ", ";
      available += "'" + name + "'";
    }
    throw IoError(file.path.string() + ": no '" + file.columns.description +
                  "' column (available columns: " + (available.empty() ? "none" : available) + ")");
  }
  const auto id_column = table.column(file.columns.record_id);
  std::vector<ConsultationRecord> records;
  records.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    ConsultationRecord record;
    if (id_column) record.record_id = text::trim(row[*id_column]);
    if (record.record_id.empty()) record.record_id = std::to_string(i);
    record.description = row[*description];
    if (text::trim(record.description).empty()) record.description.clear();
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      if (c == *description || (id_column && c == *id_column)) continue;
      record.metadata[table.header[c]] = row[c];
    }
    records.push_back(std::move(record));
  }
  return records;
}

NamePool::NamePool(std::uint64_t seed, std::size_t size) : seed_(seed) {
  static const std::vector<std::string> kSurnames = {
      "王", "李", "张", "刘", "陈", "杨", "黄", "赵", "吴", "周", "徐", "孙", "马", "朱",
      "胡", "郭", "何", "高", "林", "罗", "郑", "梁", "谢", "宋", "唐", "许", "韩", "冯",
      "邓", "曹", "彭", "曾", "肖", "田", "董", "袁", "潘", "于", "蒋", "蔡"};
  static const std::vector<std::string> kGiven = {
      "伟", "芳", "娜", "敏", "静", "丽", "强", "磊", "军", "洋", "勇", "艳", "杰", "娟", "涛",
      "明", "超", "秀", "霞", "平", "刚", "桂", "英", "华", "玉", "兰", "萍", "红", "鹏", "辉",
      "建", "国", "晓", "宇", "欣", "怡", "浩", "然", "子", "轩", "思", "雨", "嘉", "文", "博"};
  if (size == 0) throw ConfigError("name pool size must be positive");
  const std::size_t capacity = kSurnames.size() * kGiven.size() * (kGiven.size() + 1);
  size = std::min(size, capacity);
  std::mt19937_64 rng(seed);
  std::set<std::string> seen;
  while (names_.size() < size) {
    std::string name = kSurnames[rng() % kSurnames.size()];
    name += kGiven[rng() % kGiven.size()];
    if (rng() % 2 == 0) name += kGiven[rng() % kGiven.size()];
    if (seen.insert(name).second) names_.push_back(std::move(name));
  }
}

NamePool::NamePool(std::uint64_t seed, std::vector<std::string> names)
    : seed_(seed), names_(std::move(names)) {
  if (names_.empty()) throw ConfigError("name pool must not be empty");
}

const std::vector<std::string>& default_placeholder_patterns() {
  static const std::vector<std::string> kPatterns = {
      R"([*＊]{2,})",
      R"(X{2,}|Ｘ{2,})",
      R"(某某)",
      R"(<NAME>|\[NAME\]|\[姓名\]|【姓名】)",
  };
  return kPatterns;
}

std::vector<ConsultationRecord> fill_names(std::vector<ConsultationRecord> records,
                                           const NamePool& pool,
                                           const std::vector<std::string>& placeholder_patterns) {
  if (pool.names().empty()) throw ConfigError("name pool must not be empty");
  if (placeholder_patterns.empty()) return records;
  std::wstring combined;
  for (const auto& p : placeholder_patterns) {
    if (!combined.empty()) combined += L"|";
    combined += L"(?:" + text::to_wide(p) + L")";
  }
  std::wregex pattern;
  try {
    pattern = std::wregex(combined, std::regex::ECMAScript);
  } catch (const std::regex_error& e) {
    throw ConfigError(std::string("invalid placeholder pattern: ") + e.what());
  }

  const auto& names = pool.names();
  for (std::size_t index = 0; index < records.size(); ++index) {
    auto& record = records[index];
    const std::wstring wide = text::to_wide(record.description);
    auto it = std::wsregex_iterator(wide.begin(), wide.end(), pattern);
    if (it == std::wsregex_iterator()) continue;

    std::seed_seq seq{low32(pool.seed()), high32(pool.seed()), low32(index), high32(index)};
    std::mt19937_64 rng(seq);
    std::vector<std::size_t> remaining(names.size());
    std::iota(remaining.begin(), remaining.end(), std::size_t{0});
    auto draw = [&] {
      if (remaining.empty()) {
        remaining.resize(names.size());
        std::iota(remaining.begin(), remaining.end(), std::size_t{0});
      }
      const std::size_t pick = rng() % remaining.size();
      const std::size_t name = remaining[pick];
      remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pick));
      return names[name];
    };

    std::wstring out;
    std::size_t last = 0;
    for (; it != std::wsregex_iterator(); ++it) {
      const auto& m = *it;
      if (m.length(0) == 0) continue;
      const auto pos = static_cast<std::size_t>(m.position(0));
      out.append(wide, last, pos - last);
      out += text::to_wide(draw());
      last = pos + static_cast<std::size_t>(m.length(0));
    }
    out.append(wide, last, std::wstring::npos);
    record.description = text::from_wide(out);
  }
  return records;
}

std::vector<ResultRow> result_rows(const std::vector<RecordResult>& results, const Taxonomy& taxonomy) {
  std::vector<ResultRow> rows;
  for (const auto& r : results) {
    for (std::size_t i = 0; i < r.triples.size(); ++i) {
      const auto& t = r.triples[i];
      rows.push_back(ResultRow{r.record_id, t.entity, t.category, t.level.value(),
                               i < r.triple_rules.size() ? r.triple_rules[i] : std::vector<std::string>{},
                               taxonomy.label_of(t.category)});
    }
    for (const auto& v : r.schema_violations) {
      rows.push_back(ResultRow{r.record_id, v.entity, v.category, v.level, {}, std::string()});
    }
    if (r.triples.empty() && r.schema_violations.empty()) {
      rows.push_back(ResultRow{r.record_id, "", "", nullptr, {}, ""});
    }
  }
  return rows;
}

void write_rows(const std::filesystem::path& path, const std::vector<ResultRow>& rows,
                std::optional<FileFormat> format) {
  const FileFormat resolved = resolve_format(path, format);
  if (resolved == FileFormat::kJsonLines) {
    std::string out;
    for (const auto& row : rows) {
      ordered_json doc = ordered_json::object();
      doc["record_id"] = row.record_id;
      doc["entity"] = row.entity;
      doc["category"] = row.category;
      doc["level"] = row.level;
      doc["rules_fired"] = row.rules_fired;
      doc["category_label"] = row.category_label;
      out += doc.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
      out += '\n';
    }
    write_file(path, out);
    return;
  }
  Table table;
  table.header = result_columns();
  for (const auto& row : rows) {
    table.rows.push_back({row.record_id, row.entity, row.category, level_to_cell(row.level),
                          join_rules(row.rules_fired), row.category_label});
  }
  write_table(path, table, resolved);
}

std::vector<ResultRow> read_rows(const std::filesystem::path& path, std::optional<FileFormat> format) {
  const FileFormat resolved = resolve_format(path, format);
  std::vector<ResultRow> rows;
  if (resolved == FileFormat::kJsonLines) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line_no == 1) line = strip_bom(line);
      if (text::trim(line).empty()) continue;
      const std::string where = path.string() + " line " + std::to_string(line_no);
      const auto doc = nlohmann::json::parse(line, nullptr, false);
      if (doc.is_discarded() || !doc.is_object()) throw IoError(where + ": not a JSON object");
      ResultRow row;
      const auto id = doc.find("record_id");
      if (id == doc.end() || !(id->is_string() || id->is_number_integer())) {
        throw IoError(where + ": missing record_id");
      }
      row.record_id = id->is_string() ? id->get<std::string>() : id->dump();
      if (const auto e = doc.find("entity"); e != doc.end() && !e->is_null()) {
        row.entity = e->is_string() ? e->get<std::string>() : e->dump();
      }
      if (const auto c = doc.find("category"); c != doc.end() && !c->is_null()) {
        row.category = c->is_string() ? c->get<std::string>() : c->dump();
      }
      if (const auto l = doc.find("level"); l != doc.end()) row.level = *l;
      if (const auto r = doc.find("rules_fired"); r != doc.end()) {
        if (r->is_array()) {
          for (const auto& id_value : *r) {
            if (id_value.is_string()) row.rules_fired.push_back(id_value.get<std::string>());
          }
        } else if (r->is_string()) {
          row.rules_fired = split_rules(r->get<std::string>());
        }
      }
      if (const auto lab = doc.find("category_label"); lab != doc.end() && lab->is_string()) {
        row.category_label = lab->get<std::string>();
      }
      rows.push_back(std::move(row));
    }
    return rows;
  }

  const Table table = read_table(path, resolved);
  const auto col = [&](const std::string& name, bool required) -> std::optional<std::size_t> {
    const auto c = table.column(name);
    if (!c && required) throw IoError(path.string() + ": missing column '" + name + "'");
    return c;
  };
  const auto id = col("record_id", true);
  const auto entity = col("entity", true);
  const auto category = col("category", true);
  const auto level = col("level", true);
  const auto rules = col("rules_fired", false);
  const auto label = col("category_label", false);
  for (const auto& cells : table.rows) {
    ResultRow row;
    row.record_id = cells[*id];
    row.entity = cells[*entity];
    row.category = cells[*category];
    row.level = level_from_cell(cells[*level]);
    if (rules) row.rules_fired = split_rules(cells[*rules]);
    if (label) row.category_label = cells[*label];
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_results(const std::vector<RecordResult>& results, const std::filesystem::path& path,
                   const Taxonomy& taxonomy, std::optional<FileFormat> format) {
  write_rows(path, result_rows(results, taxonomy), format);
}

std::vector<PredictedRecord> predictions_from_rows(const std::vector<ResultRow>& rows,
                                                   const Taxonomy& taxonomy) {
  std::vector<PredictedRecord> out;
  std::map<std::string, std::size_t> index;
  for (const auto& row : rows) {
    auto [it, inserted] = index.emplace(row.record_id, out.size());
    if (inserted) out.push_back(PredictedRecord{row.record_id, {}, 0});
    auto& record = out[it->second];
    if (row.is_marker()) continue;
    if (auto triple = valid_triple(row, taxonomy)) {
      record.triples.push_back(std::move(*triple));
    } else {
      ++record.incompatible;
    }
  }
  return out;
}

std::vector<PredictedRecord> read_predictions(const std::filesystem::path& path,
                                              const Taxonomy& taxonomy,
                                              std::optional<FileFormat> format) {
  return predictions_from_rows(read_rows(path, format), taxonomy);
}

std::vector<GoldRecord> gold_from_rows(const std::vector<ResultRow>& rows, const Taxonomy& taxonomy) {
  std::vector<GoldRecord> out;
  std::map<std::string, std::size_t> index;
  std::set<std::tuple<std::string, std::string, std::string, int>> seen;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    auto [it, inserted] = index.emplace(row.record_id, out.size());
    if (inserted) out.push_back(GoldRecord{row.record_id, {}});
    if (row.is_marker()) continue;
    auto triple = valid_triple(row, taxonomy);
    if (!triple) {
      throw IoError("gold row " + std::to_string(i + 1) + " (record " + row.record_id +
                    "): category or level outside the taxonomy");
    }
    if (!seen.emplace(row.record_id, triple->entity, triple->category, triple->level.value()).second) {
      throw IoError("gold row " + std::to_string(i + 1) + " (record " + row.record_id +
                    "): duplicate triple");
    }
    out[it->second].triples.push_back(std::move(*triple));
  }
  return out;
}

std::vector<GoldRecord> read_gold(const std::filesystem::path& path, const Taxonomy& taxonomy,
                                  std::optional<FileFormat> format) {
  return gold_from_rows(read_rows(path, format), taxonomy);
}

}  // namespace phigrade
