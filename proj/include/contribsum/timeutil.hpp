#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace contribsum {

using UtcTime = std::chrono::sys_seconds;

/// Parses "YYYY-MM-DDTHH:MM:SSZ", "YYYY-MM-DD HH:MM:SS" (UTC assumed) or a
/// bare date "YYYY-MM-DD" (midnight UTC). Throws Error on anything else.
UtcTime parse_utc(std::string_view text);

/// Formats as "YYYY-MM-DDTHH:MM:SSZ".
std::string format_utc(UtcTime t);

inline UtcTime from_unix(std::int64_t seconds) { return UtcTime{std::chrono::seconds{seconds}}; }
inline std::int64_t to_unix(UtcTime t) { return t.time_since_epoch().count(); }

}  // namespace contribsum
