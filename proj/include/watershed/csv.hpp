#ifndef WATERSHED_CSV_HPP
#define WATERSHED_CSV_HPP

#include <string>
#include <string_view>
#include <vector>

namespace watershed {

// Locale-independent shortest representation with at most `digits`
// significant digits ("%.{digits}g" semantics, C locale).
std::string format_number(double value, int digits = 9);

// Exact round-trip representation.
std::string format_exact(double value);

std::vector<std::string> split_csv_line(std::string_view line, char delimiter = ',');

// Strict parsers; return false on any trailing garbage.
bool parse_double(std::string_view text, double& out);
bool parse_int(std::string_view text, long long& out);

std::string_view trim(std::string_view text);

}  // namespace watershed

#endif  // WATERSHED_CSV_HPP
