#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace bxent {

/// Reads the TOML subset used by run configs into a JSON tree: tables,
/// arrays of tables, dotted keys, basic/literal (and multi-line) strings,
/// integers, floats, booleans, arrays and inline tables. Date-time values
/// are rejected. Throws ConfigError with the line number.
nlohmann::ordered_json parse_toml(std::string_view text, const std::string& source = "<toml>");
nlohmann::ordered_json read_toml_file(const std::filesystem::path& path);

/// Inverse of parse_toml for trees of objects, arrays and scalars. Null
/// members are omitted.
std::string write_toml(const nlohmann::ordered_json& doc);

}  // namespace bxent
