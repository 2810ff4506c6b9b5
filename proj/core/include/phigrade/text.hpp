#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace phigrade::text {

// Byte offsets of every code point start in `s`, plus a trailing s.size().
// Ill-formed UTF-8 bytes are treated as one-byte units so slicing on these
// offsets always reproduces the input exactly.
std::vector<std::size_t> code_point_offsets(std::string_view s);

// Lossy decode: ill-formed sequences become U+FFFD.
std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(std::u32string_view s);

std::wstring to_wide(std::string_view s);
std::string from_wide(std::wstring_view s);

bool is_space(char32_t c);

std::string trim(std::string_view s);

// Canonical form used for vocabulary lookups and entity matching:
// Unicode whitespace trimmed and collapsed to one ASCII space, full-width
// ASCII folded to half-width, en/em dashes folded to '-', Latin letters
// lower-cased. CJK text passes through unchanged.
std::string normalize_label(std::string_view s);

// Escapes a literal so it can be embedded in an ECMAScript regex.
std::string regex_escape(std::string_view s);

// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
std::uint64_t fnv1a64(std::string_view s);
std::string fingerprint(std::string_view s);

}  // namespace phigrade::text
