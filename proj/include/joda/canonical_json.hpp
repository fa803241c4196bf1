#pragma once

#include <string>

#include <json.hpp>

namespace joda {

/// Shortest decimal string that parses back to exactly `v`.
std::string format_double(double v);

/// Deterministic JSON text: sorted keys, two-space indent, shortest
/// round-trip numbers, trailing newline.
std::string dump_canonical(const nlohmann::json& j);

}  // namespace joda
