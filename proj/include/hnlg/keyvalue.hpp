// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hnlg {

/// `key = value` lines; `#` starts a comment, blank lines are ignored.
/// Throws ParseError (with line number) on lines without '=' or repeated keys.
std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text);

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

/// Whole-string unsigned / floating-point conversion; ParseError naming `key` otherwise.
std::uint64_t parse_uint(std::string_view value, std::string_view key);
double parse_double(std::string_view value, std::string_view key);
bool parse_bool(std::string_view value, std::string_view key);

}  // namespace hnlg
