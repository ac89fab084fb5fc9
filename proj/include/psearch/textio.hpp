#ifndef PSEARCH_TEXTIO_HPP_
#define PSEARCH_TEXTIO_HPP_

#include <iosfwd>
#include <string>
#include <string_view>

namespace psearch::textio {

// Shortest text that parses back to the same double (%.17g).
std::string exact(double x);
// Fixed-point with the given number of decimals; used for CSV columns.
std::string fixed(double x, int decimals);

double parse_double(std::string_view s);  // throws kFormatError
long long parse_int(std::string_view s);  // throws kFormatError

// Reads "key value" from the next line; throws kFormatError on mismatch.
std::string expect_key(std::istream& in, std::string_view key);

std::string_view trim(std::string_view s);

}  // namespace psearch::textio

#endif  // PSEARCH_TEXTIO_HPP_
