#pragma once

#include <string>

#include <fmt/format.h>

namespace labeleff {

/// Shortest decimal string that parses back to the same double.
inline std::string format_real(double value) { return fmt::format("{}", value); }

}  // namespace labeleff
