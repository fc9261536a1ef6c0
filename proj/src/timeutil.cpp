#include <contribsum/error.hpp>
#include <contribsum/timeutil.hpp>

#include <ctime>
#include <fmt/format.h>

namespace contribsum {

UtcTime parse_utc(std::string_view text) {
    std::string s(text);
    std::tm tm{};
    const char* end = nullptr;
    for (const char* format : {"%Y-%m-%dT%H:%M:%SZ", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d"}) {
        tm = std::tm{};
        end = strptime(s.c_str(), format, &tm);
        if (end != nullptr && *end == '\0') break;
        end = nullptr;
    }
    if (end == nullptr) throw Error("unparseable UTC timestamp: '" + s + "'");
    return from_unix(static_cast<std::int64_t>(timegm(&tm)));
}

std::string format_utc(UtcTime t) {
    std::time_t raw = static_cast<std::time_t>(to_unix(t));
    std::tm tm{};
    gmtime_r(&raw, &tm);
    return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}Z", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                       tm.tm_hour, tm.tm_min, tm.tm_sec);
}

}  // namespace contribsum
