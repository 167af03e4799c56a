// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace forge {

std::string_view trim(std::string_view s);
bool is_blank(std::string_view s);

// ASCII lowercase; bytes >= 0x80 pass through untouched.
std::string casefold(std::string_view s);

std::string collapse_whitespace(std::string_view s);

// casefold + collapse whitespace + strip trailing punctuation (ASCII and the
// common CJK full-width marks). Used for duplicate detection and answer
// equality checks.
std::string normalize_text(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

bool starts_with_ci(std::string_view s, std::string_view prefix);

// Strict whole-string numeric parses (after trimming).
std::optional<long long> parse_integer(std::string_view s);
std::optional<double> parse_number(std::string_view s);

// Shortest round-trippable rendering of a double ("7.5", "12", "-0.25").
std::string format_number(double v);

}  // namespace forge
