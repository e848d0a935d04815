#pragma once

#include <string>

namespace resbound {

// Shortest decimal string that round-trips the exact value; locale-free.
// Used for every float that lands in a CSV or JSON report.
std::string format_double(double v);

// Parses what format_double wrote. Throws DataError on junk or trailing text.
double parse_double(const std::string& s);

}  // namespace resbound
