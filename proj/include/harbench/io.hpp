#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace harbench {

/// Throws Error{IoError}.
std::string read_text_file(const std::filesystem::path& path);
/// Creates parent directories; throws Error{IoError}.
void write_text_file(const std::filesystem::path& path, std::string_view content);

/// Shortest decimal text that parses back to the same double; "inf"/"-inf"/"nan"
/// for non-finite values.
std::string format_double(double value);
/// Inverse of format_double; throws Error{FormatError}.
double parse_double(std::string_view text);

/// Quotes a CSV field when it contains a comma, quote or newline.
std::string csv_escape(std::string_view field);
/// Splits one CSV record (RFC 4180 quoting, no embedded newlines).
std::vector<std::string> csv_split(std::string_view line);

/// File-name-safe rendering of a class name.
std::string file_stem_for(std::string_view name);

}  // namespace harbench
