#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sgim {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Parses `key = value` lines; '#' starts a comment. Duplicate keys are an error.
KeyValues parse_key_values(std::string_view text, std::string_view source);

double parse_double(const std::string& key, const std::string& value);
long long parse_int(const std::string& key, const std::string& value);
bool parse_bool(const std::string& key, const std::string& value);

/// Shortest decimal text that reads back to the identical double.
std::string format_double(double v);

}  // namespace sgim
