#pragma once

#include <string_view>

#include <json.hpp>

namespace embanon::harness {

// Parses the TOML subset used by experiment files into JSON:
//   key = value, dotted keys, [table], [[array of tables]], # comments,
//   basic "strings" and 'literal strings', integers (with _ separators),
//   floats (incl. exponents, inf, nan), booleans, arrays (multi-line,
//   trailing comma) and inline tables.
// Dates, multi-line strings and hex/octal/binary integers are rejected.
// Throws ConfigError naming the line of the first problem.
nlohmann::json parse_toml(std::string_view text);

}  // namespace embanon::harness
