#pragma once

#include <string>

#include <json.hpp>

namespace clover {

// Deterministic JSON text: object keys sorted, floating-point numbers with six
// significant digits, non-finite numbers as null, two-space indentation.
std::string stable_dump(const nlohmann::json& value);

// printf("%.6g") without locale surprises.
std::string format_g6(double value);

}  // namespace clover
