#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace fallacy::text {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
/// Trims and replaces internal whitespace runs with a single space.
std::string collapse_whitespace(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
/// Case-insensitive search (ASCII folding); npos when absent.
std::size_t ifind(std::string_view haystack, std::string_view needle, std::size_t from = 0);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool is_word_char(char c);

}  // namespace fallacy::text
