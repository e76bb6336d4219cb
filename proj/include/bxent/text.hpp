#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace bxent {

/// Splits on every occurrence of `delim` (empty fields kept).
std::vector<std::string_view> split(std::string_view text, std::string_view delim);

std::string_view trim(std::string_view text);

/// getline that also strips a trailing '\r'.
bool read_line(std::istream& in, std::string& line);

bool is_valid_utf8(std::string_view text);
/// Interprets bytes as ISO-8859-1 and re-encodes them as UTF-8.
std::string latin1_to_utf8(std::string_view text);
/// Returns text unchanged when it is valid UTF-8, else transcodes from Latin-1.
std::string ensure_utf8(std::string_view text);

std::string ascii_lower(std::string_view text);

/// Lower-cases ASCII, collapses whitespace runs to one space, trims, and
/// strips one layer of matching surrounding quotes.
std::string normalize_title(std::string_view text);

std::int64_t parse_int(std::string_view text);
double parse_double(std::string_view text);

/// Shortest decimal form that round-trips to the same double.
std::string format_double(double value);

}  // namespace bxent

namespace bxent {

/// Quotes a CSV field when it contains a comma, quote or line break.
std::string csv_field(std::string_view value);
/// Splits one CSV record; quoted fields may contain commas and doubled quotes.
std::vector<std::string> parse_csv_record(std::string_view line);

}  // namespace bxent
