#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mbi {

/// Ordered `key = value` records. Blank lines and lines starting with '#' are
/// skipped; keys may repeat.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

KeyValues parse_key_values(std::string_view text);

std::optional<std::string> find_value(const KeyValues& kv, std::string_view key);
std::string require_value(const KeyValues& kv, std::string_view key);

long long parse_int(std::string_view s);
std::uint64_t parse_u64(std::string_view s);
double parse_double(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);
std::string trim(std::string_view s);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace mbi
