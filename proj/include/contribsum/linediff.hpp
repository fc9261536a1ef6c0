#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace contribsum::diff {

/// Splits text into lines without their terminators. A trailing newline does
/// not produce an extra empty line; "\r\n" is treated as one terminator.
std::vector<std::string_view> split_lines(std::string_view text);

/// Line equality used for ownership: trailing whitespace is ignored.
std::string_view strip_trailing_ws(std::string_view line) noexcept;

/// Pairs (old_index, new_index) of a longest common subsequence of the two
/// line sequences under trailing-whitespace-insensitive comparison. Pairs are
/// strictly increasing in both coordinates.
using LineMatch = std::pair<std::size_t, std::size_t>;
std::vector<LineMatch> match_lines(const std::vector<std::string_view>& old_lines,
                                   const std::vector<std::string_view>& new_lines);

struct LineStats {
    std::size_t added = 0;
    std::size_t deleted = 0;
};

LineStats line_stats(std::string_view old_text, std::string_view new_text);

/// NUL byte within the first 8 KiB.
bool looks_binary(std::string_view content) noexcept;

/// matched lines / max(line counts); 1.0 for two empty texts.
double similarity(std::string_view old_text, std::string_view new_text);

}  // namespace contribsum::diff
