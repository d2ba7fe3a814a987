#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace kapps {

using Timestamp = std::chrono::sys_time<std::chrono::microseconds>;

// "2026-03-15T14:32:00.000000Z"
std::string format_timestamp(Timestamp ts);
// Accepts xsd:dateTime forms with optional fraction and Z / +hh:mm offset.
std::optional<Timestamp> parse_timestamp(std::string_view text);

}  // namespace kapps
