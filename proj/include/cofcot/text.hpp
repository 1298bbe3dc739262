#pragma once

#include <string>
#include <string_view>
#include <vector>

// Small ASCII string helpers shared across modules.
namespace cofcot::text {

bool is_space(char c);
std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
std::string to_upper(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool istarts_with(std::string_view s, std::string_view prefix);

// Splits on runs of whitespace; never yields empty tokens.
std::vector<std::string> split_ws(std::string_view s);

// Trims and replaces every internal whitespace run with one space.
std::string collapse_ws(std::string_view s);

std::vector<std::string> split_lines(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool contains(std::string_view haystack, std::string_view needle);

}  // namespace cofcot::text
