#include <contribsum/linediff.hpp>

#include <algorithm>
#include <unordered_map>

namespace contribsum::diff {

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string_view::npos) {
            lines.push_back(text.substr(pos));
            break;
        }
        auto line = text.substr(pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        pos = eol + 1;
    }
    return lines;
}

std::string_view strip_trailing_ws(std::string_view line) noexcept {
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r' ||
                             line.back() == '\f' || line.back() == '\v')) {
        line.remove_suffix(1);
    }
    return line;
}

namespace {

using Seq = std::vector<int>;

// Linear-space Myers bisection over interned line ids, following the
// well-known middle-snake formulation. Appends matches with the given
// offsets into `out`.
class Matcher {
public:
    explicit Matcher(std::vector<LineMatch>& out) : out_(out) {}

    void run(const int* a, std::size_t n, const int* b, std::size_t m, std::size_t a_off, std::size_t b_off) {
        std::size_t prefix = 0;
        while (prefix < n && prefix < m && a[prefix] == b[prefix]) {
            out_.emplace_back(a_off + prefix, b_off + prefix);
            ++prefix;
        }
        a += prefix;
        b += prefix;
        n -= prefix;
        m -= prefix;
        a_off += prefix;
        b_off += prefix;
        std::size_t suffix = 0;
        while (suffix < n && suffix < m && a[n - 1 - suffix] == b[m - 1 - suffix]) ++suffix;
        n -= suffix;
        m -= suffix;
        if (n > 0 && m > 0) bisect(a, n, b, m, a_off, b_off);
        for (std::size_t i = 0; i < suffix; ++i) out_.emplace_back(a_off + n + i, b_off + m + i);
    }

private:
    void bisect(const int* a, std::size_t n_u, const int* b, std::size_t m_u, std::size_t a_off, std::size_t b_off) {
        const long n = static_cast<long>(n_u);
        const long m = static_cast<long>(m_u);
        const long max_d = (n + m + 1) / 2;
        const long v_offset = max_d;
        const long v_length = 2 * max_d;
        std::vector<long> v1(static_cast<std::size_t>(v_length), -1);
        std::vector<long> v2(static_cast<std::size_t>(v_length), -1);
        v1[v_offset + 1] = 0;
        v2[v_offset + 1] = 0;
        const long delta = n - m;
        const bool front = (delta % 2 != 0);
        long k1start = 0, k1end = 0, k2start = 0, k2end = 0;
        for (long d = 0; d < max_d; ++d) {
            for (long k1 = -d + k1start; k1 <= d - k1end; k1 += 2) {
                const long k1_offset = v_offset + k1;
                long x1 = (k1 == -d || (k1 != d && v1[k1_offset - 1] < v1[k1_offset + 1])) ? v1[k1_offset + 1]
                                                                                           : v1[k1_offset - 1] + 1;
                long y1 = x1 - k1;
                while (x1 < n && y1 < m && a[x1] == b[y1]) {
                    ++x1;
                    ++y1;
                }
                v1[k1_offset] = x1;
                if (x1 > n) {
                    k1end += 2;
                } else if (y1 > m) {
                    k1start += 2;
                } else if (front) {
                    const long k2_offset = v_offset + delta - k1;
                    if (k2_offset >= 0 && k2_offset < v_length && v2[k2_offset] != -1) {
                        const long x2 = n - v2[k2_offset];
                        if (x1 >= x2) return split(a, n, b, m, x1, y1, a_off, b_off);
                    }
                }
            }
            for (long k2 = -d + k2start; k2 <= d - k2end; k2 += 2) {
                const long k2_offset = v_offset + k2;
                long x2 = (k2 == -d || (k2 != d && v2[k2_offset - 1] < v2[k2_offset + 1])) ? v2[k2_offset + 1]
                                                                                           : v2[k2_offset - 1] + 1;
                long y2 = x2 - k2;
                while (x2 < n && y2 < m && a[n - x2 - 1] == b[m - y2 - 1]) {
                    ++x2;
                    ++y2;
                }
                v2[k2_offset] = x2;
                if (x2 > n) {
                    k2end += 2;
                } else if (y2 > m) {
                    k2start += 2;
                } else if (!front) {
                    const long k1_offset = v_offset + delta - k2;
                    if (k1_offset >= 0 && k1_offset < v_length && v1[k1_offset] != -1) {
                        const long x1 = v1[k1_offset];
                        const long y1 = v_offset + x1 - k1_offset;
                        if (x1 >= n - x2) return split(a, n, b, m, x1, y1, a_off, b_off);
                    }
                }
            }
        }
        // No common line at all.
    }

    void split(const int* a, long n, const int* b, long m, long x, long y, std::size_t a_off, std::size_t b_off) {
        run(a, static_cast<std::size_t>(x), b, static_cast<std::size_t>(y), a_off, b_off);
        run(a + x, static_cast<std::size_t>(n - x), b + y, static_cast<std::size_t>(m - y), a_off + x, b_off + y);
    }

    std::vector<LineMatch>& out_;
};

}  // namespace

std::vector<LineMatch> match_lines(const std::vector<std::string_view>& old_lines,
                                   const std::vector<std::string_view>& new_lines) {
    std::unordered_map<std::string_view, int> ids;
    auto intern = [&](const std::vector<std::string_view>& lines) {
        Seq seq;
        seq.reserve(lines.size());
        for (auto line : lines) {
            auto [it, inserted] = ids.emplace(strip_trailing_ws(line), static_cast<int>(ids.size()));
            seq.push_back(it->second);
        }
        return seq;
    };
    const Seq a = intern(old_lines);
    const Seq b = intern(new_lines);
    std::vector<LineMatch> out;
    Matcher(out).run(a.data(), a.size(), b.data(), b.size(), 0, 0);
    return out;
}

LineStats line_stats(std::string_view old_text, std::string_view new_text) {
    auto old_lines = split_lines(old_text);
    auto new_lines = split_lines(new_text);
    auto common = match_lines(old_lines, new_lines).size();
    return LineStats{new_lines.size() - common, old_lines.size() - common};
}

bool looks_binary(std::string_view content) noexcept {
    return content.substr(0, 8192).find('\0') != std::string_view::npos;
}

double similarity(std::string_view old_text, std::string_view new_text) {
    auto old_lines = split_lines(old_text);
    auto new_lines = split_lines(new_text);
    auto longest = std::max(old_lines.size(), new_lines.size());
    if (longest == 0) return 1.0;
    return static_cast<double>(match_lines(old_lines, new_lines).size()) / static_cast<double>(longest);
}

}  // namespace contribsum::diff
