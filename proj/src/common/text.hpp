#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace derm::text {

std::string trim(std::string_view s);
std::string lower(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

// Percent-escapes tab, newline, carriage return, '=' and '%' so a value can
// sit inside a tab-separated key=value line.
std::string escape_field(std::string_view value);
std::string unescape_field(std::string_view value);

// Parses a `key=value<TAB>key=value` line into a map. Throws kCorrupt on a
// field lacking '='.
std::map<std::string, std::string> parse_fields(std::string_view line);

// Shortest representation that round-trips through strtod.
std::string format_double(double value);
// Fixed point with `decimals` digits.
std::string format_fixed(double value, int decimals);

double parse_double(std::string_view s, std::string_view what);
long long parse_int(std::string_view s, std::string_view what);

// Writes `content` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

std::string utc_timestamp();

}  // namespace derm::text
