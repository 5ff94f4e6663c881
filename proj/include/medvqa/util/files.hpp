#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace medvqa::util {

std::string read_file(const std::filesystem::path& path);

// Write to a sibling temp file then rename over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// One JSON object per line. Blank lines are skipped. A malformed line throws
// Error(Parse) naming the file and 1-based line number.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
std::string to_jsonl(const std::vector<nlohmann::json>& records);
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& records);

// Relative paths are taken against base; absolute paths pass through.
std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p);

std::string utc_timestamp();

}  // namespace medvqa::util
