#include "xlsx.hpp"

#include <zlib.h>

#include <cstdint>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <string_view>

#include "phigrade/error.hpp"
#include "phigrade/text.hpp"

namespace phigrade::xlsx {
namespace {

// ---- zip container -------------------------------------------------------

std::uint32_t read_u32(const std::string& b, std::size_t at) {
  if (at + 4 > b.size()) throw IoError("xlsx: truncated zip structure");
  return static_cast<std::uint32_t>(static_cast<unsigned char>(b[at])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 3])) << 24;
}

std::uint16_t read_u16(const std::string& b, std::size_t at) {
  if (at + 2 > b.size()) throw IoError("xlsx: truncated zip structure");
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                    static_cast<unsigned char>(b[at + 1]) << 8);
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::string inflate_raw(std::string_view data, std::size_t expected) {
  std::string out(expected, '\0');
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw IoError("xlsx: inflate init failed");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
  zs.avail_in = static_cast<uInt>(data.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || zs.total_out != expected) throw IoError("xlsx: corrupt deflate stream");
  return out;
}

std::string deflate_raw(std::string_view data) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, -MAX_WBITS, 8, Z_DEFAULT_STRATEGY) !=
      Z_OK) {
    throw IoError("xlsx: deflate init failed");
  }
  std::string out(deflateBound(&zs, static_cast<uLong>(data.size())), '\0');
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
  zs.avail_in = static_cast<uInt>(data.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw IoError("xlsx: deflate failed");
  out.resize(zs.total_out);
  return out;
}

std::map<std::string, std::string> read_zip(const std::string& bytes) {
  if (bytes.size() < 22) throw IoError("xlsx: not a zip archive");
  std::size_t eocd = std::string::npos;
  const std::size_t lowest = bytes.size() > 22 + 0xFFFF ? bytes.size() - 22 - 0xFFFF : 0;
  for (std::size_t at = bytes.size() - 22 + 1; at-- > lowest;) {
    if (read_u32(bytes, at) == 0x06054b50) {
      eocd = at;
      break;
    }
  }
  if (eocd == std::string::npos) throw IoError("xlsx: not a zip archive");
  const std::size_t count = read_u16(bytes, eocd + 10);
  std::size_t at = read_u32(bytes, eocd + 16);
  std::map<std::string, std::string> files;
  for (std::size_t i = 0; i < count; ++i) {
    if (read_u32(bytes, at) != 0x02014b50) throw IoError("xlsx: bad central directory");
    const std::uint16_t method = read_u16(bytes, at + 10);
    const std::uint32_t csize = read_u32(bytes, at + 20);
    const std::uint32_t usize = read_u32(bytes, at + 24);
    const std::size_t name_len = read_u16(bytes, at + 28);
    const std::size_t extra_len = read_u16(bytes, at + 30);
    const std::size_t comment_len = read_u16(bytes, at + 32);
    const std::size_t local = read_u32(bytes, at + 42);
    if (at + 46 + name_len > bytes.size()) throw IoError("xlsx: bad central directory");
    std::string name = bytes.substr(at + 46, name_len);
    at += 46 + name_len + extra_len + comment_len;

    if (csize == 0xFFFFFFFF || usize == 0xFFFFFFFF) throw IoError("xlsx: zip64 is not supported");
    if (read_u32(bytes, local) != 0x04034b50) throw IoError("xlsx: bad local header");
    const std::size_t data_at = local + 30 + read_u16(bytes, local + 26) + read_u16(bytes, local + 28);
    if (data_at + csize > bytes.size()) throw IoError("xlsx: truncated entry " + name);
    const std::string_view data(bytes.data() + data_at, csize);
    if (method == 0) {
      files[name] = std::string(data);
    } else if (method == 8) {
      files[name] = inflate_raw(data, usize);
    } else {
      throw IoError("xlsx: unsupported compression method in " + name);
    }
  }
  return files;
}

std::string write_zip(const std::vector<std::pair<std::string, std::string>>& files) {
  std::string out;
  std::string central;
  for (const auto& [name, content] : files) {
    const std::string packed = deflate_raw(content);
    const auto crc = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(content.data()), static_cast<uInt>(content.size())));
    const auto offset = static_cast<std::uint32_t>(out.size());
    // Fixed timestamp (1980-01-01 00:00) keeps output reproducible.
    put_u32(out, 0x04034b50);
    put_u16(out, 20);
    put_u16(out, 0);
    put_u16(out, 8);
    put_u16(out, 0);
    put_u16(out, 0x21);
    put_u32(out, crc);
    put_u32(out, static_cast<std::uint32_t>(packed.size()));
    put_u32(out, static_cast<std::uint32_t>(content.size()));
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    put_u16(out, 0);
    out += name;
    out += packed;

    put_u32(central, 0x02014b50);
    put_u16(central, 20);
    put_u16(central, 20);
    put_u16(central, 0);
    put_u16(central, 8);
    put_u16(central, 0);
    put_u16(central, 0x21);
    put_u32(central, crc);
    put_u32(central, static_cast<std::uint32_t>(packed.size()));
    put_u32(central, static_cast<std::uint32_t>(content.size()));
    put_u16(central, static_cast<std::uint16_t>(name.size()));
    put_u16(central, 0);
    put_u16(central, 0);
    put_u16(central, 0);
    put_u16(central, 0);
    put_u32(central, 0);
    put_u32(central, offset);
    central += name;
  }
  const auto central_at = static_cast<std::uint32_t>(out.size());
  out += central;
  put_u32(out, 0x06054b50);
  put_u16(out, 0);
  put_u16(out, 0);
  put_u16(out, static_cast<std::uint16_t>(files.size()));
  put_u16(out, static_cast<std::uint16_t>(files.size()));
  put_u32(out, static_cast<std::uint32_t>(central.size()));
  put_u32(out, central_at);
  put_u16(out, 0);
  return out;
}

// ---- XML scraps ----------------------------------------------------------

std::string xml_unescape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out.push_back(s[i]);
      continue;
    }
    const auto semi = s.find(';', i);
    if (semi == std::string_view::npos) {
      out.push_back(s[i]);
      continue;
    }
    const std::string_view name = s.substr(i + 1, semi - i - 1);
    if (name == "amp") out += '&';
    else if (name == "lt") out += '<';
    else if (name == "gt") out += '>';
    else if (name == "quot") out += '"';
    else if (name == "apos") out += '\'';
    else if (!name.empty() && name[0] == '#') {
      const bool hex = name.size() > 1 && (name[1] == 'x' || name[1] == 'X');
      const std::string digits(name.substr(hex ? 2 : 1));
      char32_t cp = 0;
      try {
        cp = static_cast<char32_t>(std::stoul(digits, nullptr, hex ? 16 : 10));
      } catch (const std::exception&) {
        out.append(s.substr(i, semi - i + 1));
        i = semi;
        continue;
      }
      out += text::encode_utf8(std::u32string(1, cp));
    } else {
      out.append(s.substr(i, semi - i + 1));
    }
    i = semi;
  }
  return out;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (const char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default:
        // XML 1.0 cannot carry other C0 controls.
        if (static_cast<unsigned char>(c) < 0x20 && c != '\t' && c != '\n' && c != '\r') break;
        out.push_back(c);
    }
  }
  return out;
}

std::optional<std::string> attribute(std::string_view tag, std::string_view name) {
  std::size_t at = 0;
  while ((at = tag.find(name, at)) != std::string_view::npos) {
    const bool starts = at > 0 && (tag[at - 1] == ' ' || tag[at - 1] == '\t' || tag[at - 1] == '\n' ||
                                   tag[at - 1] == '\r');
    const std::size_t eq = at + name.size();
    if (starts && eq + 1 < tag.size() && tag[eq] == '=' && (tag[eq + 1] == '"' || tag[eq + 1] == '\'')) {
      const char quote = tag[eq + 1];
      const auto close = tag.find(quote, eq + 2);
      if (close == std::string_view::npos) return std::nullopt;
      return xml_unescape(tag.substr(eq + 2, close - eq - 2));
    }
    at = eq;
  }
  return std::nullopt;
}

// Calls fn(open_tag, body) for every <name ...>body</name> or <name .../>.
template <typename Fn>
void for_each_element(std::string_view xml, std::string_view name, Fn fn) {
  const std::string open = "<" + std::string(name);
  const std::string close = "</" + std::string(name) + ">";
  std::size_t at = 0;
  while ((at = xml.find(open, at)) != std::string_view::npos) {
    const std::size_t after = at + open.size();
    if (after >= xml.size()) return;
    const char next = xml[after];
    if (next != ' ' && next != '>' && next != '/' && next != '\t' && next != '\n' && next != '\r') {
      at = after;
      continue;
    }
    const auto tag_end = xml.find('>', after);
    if (tag_end == std::string_view::npos) return;
    const std::string_view tag = xml.substr(at, tag_end - at + 1);
    if (xml[tag_end - 1] == '/') {
      fn(tag, std::string_view());
      at = tag_end + 1;
      continue;
    }
    const auto body_end = xml.find(close, tag_end + 1);
    if (body_end == std::string_view::npos) return;
    fn(tag, xml.substr(tag_end + 1, body_end - tag_end - 1));
    at = body_end + close.size();
  }
}

// Concatenated text of all <t> runs, skipping phonetic annotations.
std::string text_runs(std::string_view body) {
  std::string cleaned;
  std::size_t at = 0;
  while (true) {
    const auto ph = body.find("<rPh", at);
    cleaned.append(body.substr(at, ph == std::string_view::npos ? std::string_view::npos : ph - at));
    if (ph == std::string_view::npos) break;
    const auto end = body.find("</rPh>", ph);
    if (end == std::string_view::npos) break;
    at = end + 6;
  }
  std::string out;
  for_each_element(cleaned, "t", [&](std::string_view, std::string_view t) { out += xml_unescape(t); });
  return out;
}

std::size_t column_index(std::string_view ref) {
  std::size_t col = 0;
  std::size_t i = 0;
  for (; i < ref.size() && ref[i] >= 'A' && ref[i] <= 'Z'; ++i) col = col * 26 + (ref[i] - 'A' + 1);
  if (i == 0) throw IoError("xlsx: bad cell reference '" + std::string(ref) + "'");
  return col - 1;
}

std::string column_name(std::size_t index) {
  std::string name;
  ++index;
  while (index > 0) {
    const std::size_t rem = (index - 1) % 26;
    name.insert(name.begin(), static_cast<char>('A' + rem));
    index = (index - 1) / 26;
  }
  return name;
}

std::string first_sheet_path(const std::map<std::string, std::string>& files) {
  const auto workbook = files.find("xl/workbook.xml");
  const auto rels = files.find("xl/_rels/workbook.xml.rels");
  if (workbook != files.end() && rels != files.end()) {
    std::optional<std::string> rel_id;
    for_each_element(workbook->second, "sheet", [&](std::string_view tag, std::string_view) {
      if (!rel_id) rel_id = attribute(tag, "r:id");
    });
    std::optional<std::string> target;
    if (rel_id) {
      for_each_element(rels->second, "Relationship", [&](std::string_view tag, std::string_view) {
        if (!target && attribute(tag, "Id") == rel_id) target = attribute(tag, "Target");
      });
    }
    if (target) {
      std::string path = *target;
      if (!path.empty() && path[0] == '/') {
        path.erase(0, 1);
      } else {
        path = "xl/" + path;
      }
      if (files.count(path)) return path;
    }
  }
  if (files.count("xl/worksheets/sheet1.xml")) return "xl/worksheets/sheet1.xml";
  for (const auto& [name, _] : files) {
    if (name.rfind("xl/worksheets/", 0) == 0 && name.size() > 4 &&
        name.compare(name.size() - 4, 4, ".xml") == 0) {
      return name;
    }
  }
  throw IoError("xlsx: workbook has no worksheet");
}

}  // namespace

Grid read_first_sheet(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto files = read_zip(bytes);

  std::vector<std::string> shared;
  if (const auto sst = files.find("xl/sharedStrings.xml"); sst != files.end()) {
    for_each_element(sst->second, "si",
                     [&](std::string_view, std::string_view body) { shared.push_back(text_runs(body)); });
  }

  Grid grid;
  std::size_t width = 0;
  std::size_t next_row = 0;
  for_each_element(files.at(first_sheet_path(files)), "row", [&](std::string_view row_tag,
                                                                  std::string_view row_body) {
    std::size_t row_index = next_row;
    if (const auto r = attribute(row_tag, "r")) row_index = std::stoul(*r) - 1;
    next_row = row_index + 1;
    if (grid.size() <= row_index) grid.resize(row_index + 1);
    auto& row = grid[row_index];
    std::size_t next_col = 0;
    for_each_element(row_body, "c", [&](std::string_view tag, std::string_view body) {
      std::size_t col = next_col;
      if (const auto ref = attribute(tag, "r")) col = column_index(*ref);
      next_col = col + 1;
      const std::string type = attribute(tag, "t").value_or("n");
      std::string value;
      if (type == "inlineStr") {
        value = text_runs(body);
      } else {
        std::string raw;
        for_each_element(body, "v", [&](std::string_view, std::string_view v) { raw = xml_unescape(v); });
        if (type == "s") {
          const std::size_t idx = raw.empty() ? shared.size() : std::stoul(raw);
          if (idx >= shared.size()) throw IoError("xlsx: shared string index out of range");
          value = shared[idx];
        } else {
          value = raw;
        }
      }
      if (row.size() <= col) row.resize(col + 1);
      row[col] = std::move(value);
    });
    width = std::max(width, row.size());
  });
  for (auto& row : grid) row.resize(width);
  return grid;
}

void write_sheet(const std::filesystem::path& path, const Grid& rows) {
  std::string sheet =
      "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n"
      "<worksheet xmlns=\"http://schemas.openxmlformats.org/spreadsheetml/2006/main\"><sheetData>";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::string row_no = std::to_string(r + 1);
    sheet += "<row r=\"" + row_no + "\">";
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      sheet += "<c r=\"" + column_name(c) + row_no + "\" t=\"inlineStr\"><is><t xml:space=\"preserve\">";
      sheet += xml_escape(rows[r][c]);
      sheet += "</t></is></c>";
    }
    sheet += "</row>";
  }
  sheet += "</sheetData></worksheet>";

  const std::vector<std::pair<std::string, std::string>> files = {
      {"[Content_Types].xml",
       "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n"
       "<Types xmlns=\"http://schemas.openxmlformats.org/package/2006/content-types\">"
       "<Default Extension=\"rels\" ContentType=\"application/vnd.openxmlformats-package.relationships+xml\"/>"
       "<Default Extension=\"xml\" ContentType=\"application/xml\"/>"
       "<Override PartName=\"/xl/workbook.xml\" "
       "ContentType=\"application/vnd.openxmlformats-officedocument.spreadsheetml.sheet.main+xml\"/>"
       "<Override PartName=\"/xl/worksheets/sheet1.xml\" "
       "ContentType=\"application/vnd.openxmlformats-officedocument.spreadsheetml.worksheet+xml\"/>"
       "</Types>"},
      {"_rels/.rels",
       "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n"
       "<Relationships xmlns=\"http://schemas.openxmlformats.org/package/2006/relationships\">"
       "<Relationship Id=\"rId1\" "
       "Type=\"http://schemas.openxmlformats.org/officeDocument/2006/relationships/officeDocument\" "
       "Target=\"xl/workbook.xml\"/></Relationships>"},
      {"xl/workbook.xml",
       "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n"
       "<workbook xmlns=\"http://schemas.openxmlformats.org/spreadsheetml/2006/main\" "
       "xmlns:r=\"http://schemas.openxmlformats.org/officeDocument/2006/relationships\">"
       "<sheets><sheet name=\"Sheet1\" sheetId=\"1\" r:id=\"rId1\"/></sheets></workbook>"},
      {"xl/_rels/workbook.xml.rels",
       "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n"
       "<Relationships xmlns=\"http://schemas.openxmlformats.org/package/2006/relationships\">"
       "<Relationship Id=\"rId1\" "
       "Type=\"http://schemas.openxmlformats.org/officeDocument/2006/relationships/worksheet\" "
       "Target=\"worksheets/sheet1.xml\"/></Relationships>"},
      {"xl/worksheets/sheet1.xml", sheet},
  };
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  const std::string bytes = write_zip(files);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace phigrade::xlsx
