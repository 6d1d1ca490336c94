#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pctlab {

/// Shortest text that survives a strtod round trip bit-exactly (17 digits).
std::string format_double(double v);
/// Fixed four-decimal rendering used in human-readable reports.
std::string format_fixed4(double v);
double parse_double(std::string_view text);
std::int64_t parse_int(std::string_view text);

std::string join_doubles(std::span<const double> values, char sep = ',');
std::vector<std::string> split_string(std::string_view text, char sep);
std::string trim(std::string_view text);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

std::string read_file(const std::filesystem::path& path);
/// Writes via a temporary sibling and renames, so readers never see partial files.
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace pctlab
