#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace fibredist::csv {

using Row = std::vector<std::string>;

// Picks tab, semicolon or comma, whichever occurs most in the header line
// outside quotes. Semicolons are common in exports that use a decimal comma.
char detect_delimiter(std::string_view header_line);

// RFC 4180 style reader: quoted fields, doubled quotes, CRLF tolerated.
// Quoted fields may span lines.
std::vector<Row> read_all(std::istream& in, char delimiter);

// Quotes a field only when it contains the delimiter, a quote or a newline.
std::string escape(std::string_view field, char delimiter = ',');

std::string join(const Row& row, char delimiter = ',');

// Shortest round-trip rendering of a double ("%.17g" trimmed to what parses back).
std::string format_double(double v);

}  // namespace fibredist::csv
