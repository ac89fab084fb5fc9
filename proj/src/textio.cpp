#include "psearch/textio.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>

#include "psearch/error.hpp"

namespace psearch::textio {

std::string exact(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fixed(double x, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, x);
  // Avoid "-0.000000" so equal values print identically.
  std::string s = buf;
  if (s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

double parse_double(std::string_view s) {
  const std::string str(trim(s));
  if (str.empty()) throw Error(Errc::kFormatError, "empty number");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(str.c_str(), &end);
  if (end != str.c_str() + str.size() || errno == ERANGE) {
    throw Error(Errc::kFormatError, "not a number: '" + str + "'");
  }
  return v;
}

long long parse_int(std::string_view s) {
  const std::string str(trim(s));
  if (str.empty()) throw Error(Errc::kFormatError, "empty integer");
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(str.c_str(), &end, 10);
  if (end != str.c_str() + str.size() || errno == ERANGE) {
    throw Error(Errc::kFormatError, "not an integer: '" + str + "'");
  }
  return v;
}

std::string expect_key(std::istream& in, std::string_view key) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(Errc::kFormatError, "unexpected end of input, wanted '" + std::string(key) + "'");
  }
  const std::string_view view = trim(line);
  if (view.substr(0, key.size()) != key ||
      (view.size() > key.size() && view[key.size()] != ' ')) {
    throw Error(Errc::kFormatError,
                "expected '" + std::string(key) + "', got '" + std::string(view) + "'");
  }
  return std::string(trim(view.substr(key.size())));
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace psearch::textio
