#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace eegemd {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split(std::string_view s, char delim);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);
/// Fixed-point text with `decimals` digits after the point.
std::string format_fixed(double v, int decimals);

double parse_double(std::string_view s);
long parse_long(std::string_view s);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace eegemd
