// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace forge {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

std::string read_file(const fs::path& path);

// Writes via a sibling temp file and rename, creating parent directories.
void write_file_atomic(const fs::path& path, std::string_view contents);

// Calls `fn(line_number, line)` for every non-blank line; line numbers are 1-based.
void for_each_line(const fs::path& path,
                   const std::function<void(std::size_t, std::string_view)>& fn);

// One compact JSON document per line, LF terminated.
std::string to_jsonl(const std::vector<Json>& rows);
void write_jsonl(const fs::path& path, const std::vector<Json>& rows);
std::vector<Json> read_jsonl(const fs::path& path);

Json parse_json(std::string_view text, const std::string& what);
std::string dump_json(const Json& value);          // compact
std::string dump_json_pretty(const Json& value);   // 2-space indent + trailing LF

}  // namespace forge
