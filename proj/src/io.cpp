#include "kawasaki/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

#ifndef KAWASAKI_VERSION
#define KAWASAKI_VERSION "0.1.0"
#endif

namespace kawasaki {

std::string fmt_double(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (std::isnan(value)) return "nan";
  // shortest text that reads back to the same double
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, r.ptr);
}

std::string_view version_string() { return KAWASAKI_VERSION; }

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace kawasaki
