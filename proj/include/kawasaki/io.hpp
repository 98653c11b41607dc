#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace kawasaki {

/// Decimal with 17 significant digits; round-trips every double.
std::string fmt_double(double value);

/// git-describe-style version string baked in at configure time.
std::string_view version_string();

/// 64-bit FNV-1a hash, rendered as 16 hex digits.
std::uint64_t fnv1a64(std::string_view text);
std::string hex64(std::uint64_t value);

}  // namespace kawasaki
