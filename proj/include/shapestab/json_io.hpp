#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "shapestab/network.hpp"
#include "shapestab/rational.hpp"

namespace shapestab {

using json = nlohmann::ordered_json;

/// Builds a network from an already-parsed JSON value. `where` prefixes field
/// names in error messages (e.g. "network." inside a simulation config).
StorageNetwork network_from_json(const json& j, const std::string& where = "");
json network_as_json(const StorageNetwork& net);

Rational rational_from_json(const json& j, const std::string& field);
json rational_list(const std::vector<Rational>& values);
json rational_matrix(const std::vector<std::vector<Rational>>& rows);

/// Serializes like json::dump but prints every floating-point number with 17
/// significant digits (non-finite values become null).
std::string dump_json(const json& j, int indent = 2);

/// "%.17g" formatting shared by the JSON and CSV writers.
std::string format_double(double v);

/// 64-bit FNV-1a of a byte string, rendered as 16 hex digits.
std::string fnv1a64_hex(std::string_view bytes);

}  // namespace shapestab
