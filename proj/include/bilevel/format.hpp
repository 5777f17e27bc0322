#pragma once

#include <string>

namespace bilevel {

// Shortest-round-trip-independent fixed format: 17 significant digits,
// '.' decimal separator, no locale. Equivalent to printf("%.17g").
std::string format_double(double v);

}  // namespace bilevel
