#pragma once

#include <string>

namespace airsvr {

// Exact textual form of a double ("%a"), readable back with parse_double.
std::string hex_double(double v);
// Fixed-point with the given number of decimals.
std::string fixed(double v, int decimals = 3);
// Shortest decimal that round-trips.
std::string exact_decimal(double v);

// Full-string strtod (accepts hex floats, inf, nan). Throws std::invalid_argument.
double parse_double(const std::string& text);

std::string trim(const std::string& s);

}  // namespace airsvr
