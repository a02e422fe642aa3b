#pragma once

#include <filesystem>
#include <string_view>

#include <nlohmann/json.hpp>

namespace qalign {

/// Parses the TOML subset used by run configs into JSON:
///   - `# comments`, `[table]` and `[dotted.table]` headers, bare or dotted keys
///   - basic "strings" (with \" \\ \n \t \uXXXX escapes) and 'literal strings'
///   - integers (with `_` separators), floats (incl. inf/nan), booleans
///   - arrays of values (may span lines, trailing comma allowed) and { inline = "tables" }
/// Dates, multi-line strings and arrays of tables are rejected with an error naming the line.
nlohmann::json parse_toml(std::string_view text);
nlohmann::json load_toml(const std::filesystem::path& path);

}  // namespace qalign
