#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace autofeedback::text {

std::string_view trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool istarts_with(std::string_view s, std::string_view prefix);

/// A line of `s` together with its byte offset. The terminator ("\n" or
/// "\r\n") is excluded from `text`.
struct Line {
  std::size_t offset;
  std::string_view text;
};
std::vector<Line> split_lines(std::string_view s);

/// Number of tokens separated by Unicode white space (UTF-8 input).
std::size_t count_words(std::string_view s);

/// Length in bytes of the Unicode white-space code point starting at s[pos],
/// or 0 when s[pos] does not start one.
std::size_t unicode_space_at(std::string_view s, std::size_t pos);

std::string read_file(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames, creating parent directories.
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace autofeedback::text
