#pragma once

#include <string>

#include <json.hpp>

namespace gradcode {

/// Parses the TOML subset used by the config files: top-level key/value
/// pairs, [table] sections, [[array-of-table]] sections, and values that are
/// strings, booleans, integers, floats, or flat arrays thereof.
nlohmann::json parse_toml(const std::string& text);
nlohmann::json parse_toml_file(const std::string& path);

}  // namespace gradcode
