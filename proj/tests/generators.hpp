#pragma once

// Hand-rolled generators shared by the property tests and the acceptance
// runner.

#include <fmt/format.h>

#include <map>
#include <random>
#include <string>
#include <vector>

namespace testsupport {

/// A random but valid synthfix script: a few rostered students plus one
/// unrostered author, edits on main, an optional side branch that is merged
/// back, co-author trailers, renames and removals. Every line is unique, so
/// the diff has exactly one sensible alignment.
inline std::string random_history(std::mt19937& rng, int index) {
    std::uniform_int_distribution<int> students_dist(2, 4);
    const int students = students_dist(rng);
    std::string s = fmt::format("fixture random{}\n", index);
    std::vector<std::string> names, emails;
    for (int i = 0; i < students; ++i) {
        names.push_back(fmt::format("Student {}", char('A' + i)));
        emails.push_back(fmt::format("s{}@uni.edu", i));
        s += fmt::format("roster s{} | {} | {}\n", i, names.back(), emails.back());
    }
    names.push_back("Ghost Writer");
    emails.push_back("ghost@elsewhere.com");

    int minute = 0;
    int line_id = 0;
    auto date = [&] {
        ++minute;
        return fmt::format("2024-05-{:02}T{:02}:{:02}:00Z", 1 + minute / 600, (minute / 60) % 10, minute % 60);
    };
    auto lines = [&](int n, int who) {
        std::string out;
        for (int i = 0; i < n; ++i) {
            ++line_id;
            if (rng() % 5 == 0) {
                out += fmt::format("  | # note {} from {}\n", line_id, who);
            } else {
                out += fmt::format("  | value_{} = {}  # by {}\n", line_id, rng() % 1000, who);
            }
        }
        return out;
    };

    struct Branch {
        std::map<std::string, int> files;  // path -> line count
    };
    std::map<std::string, Branch> branches{{"main", {}}};
    int file_id = 0;

    auto commit = [&](const std::string& branch, bool allow_rename) {
        auto& b = branches[branch];
        const int who = int(rng() % (students + 1));
        std::string block = branch == "main" ? "commit\n" : "commit on " + branch + "\n";
        block += fmt::format("  author {} <{}>\n  date {}\n", names[who], emails[who], date());
        if (rng() % 4 == 0) {
            const int co = int(rng() % students);
            if (co != who) block += fmt::format("  coauthor {} <{}>\n", names[co], emails[co]);
        }
        block += fmt::format("  message change {}\n", minute);
        const int kind = b.files.empty() ? 0 : int(rng() % 7);
        auto pick = [&] {
            auto it = b.files.begin();
            std::advance(it, rng() % b.files.size());
            return it;
        };
        if (kind == 0 || (kind == 6 && !allow_rename)) {
            const auto path = fmt::format("{}/mod{}.py", branch == "main" ? "src" : branch, ++file_id);
            const int n = 1 + int(rng() % 8);
            block += "  write " + path + "\n" + lines(n, who);
            b.files[path] = n;
        } else if (kind == 1 || kind == 2) {
            auto it = pick();
            const int after = int(rng() % (it->second + 1));
            const int n = 1 + int(rng() % 4);
            block += fmt::format("  insert {} {}\n", it->first, after) + lines(n, who);
            it->second += n;
        } else if (kind == 3) {
            auto it = pick();
            if (it->second == 0) {
                block += fmt::format("  insert {} 0\n", it->first) + lines(1, who);
                it->second = 1;
            } else {
                const int from = 1 + int(rng() % it->second);
                const int to = from + int(rng() % (it->second - from + 1));
                const int n = int(rng() % 3);
                block += fmt::format("  replace {} {} {}\n", it->first, from, to) + lines(n, who);
                it->second += n - (to - from + 1);
            }
        } else if (kind == 4) {
            auto it = pick();
            if (it->second < 2) {
                block += fmt::format("  insert {} 0\n", it->first) + lines(1, who);
                it->second += 1;
            } else {
                const int from = 1 + int(rng() % it->second);
                const int to = std::min(it->second, from + int(rng() % 2));
                block += fmt::format("  delete {} {} {}\n", it->first, from, to);
                it->second -= to - from + 1;
            }
        } else if (kind == 5 && b.files.size() > 1 && rng() % 3 == 0) {
            auto it = pick();
            block += "  remove " + it->first + "\n";
            b.files.erase(it);
        } else if (kind == 6) {
            auto it = pick();
            const auto renamed = fmt::format("{}/renamed{}.py", branch == "main" ? "lib" : branch, ++file_id);
            block += fmt::format("  rename {} {}\n", it->first, renamed);
            const int n = it->second;
            b.files.erase(it);
            b.files[renamed] = n;
        } else {
            auto it = pick();
            block += fmt::format("  insert {} {}\n", it->first, it->second) + lines(1, who);
            it->second += 1;
        }
        return block + "end\n";
    };

    const int before = 1 + int(rng() % 6);
    for (int i = 0; i < before; ++i) s += "\n" + commit("main", true);
    if (rng() % 2 == 0) {
        s += "\nbranch side from main\n";
        branches["side"] = Branch{};
        const int side_commits = 1 + int(rng() % 3);
        // Side commits only touch side-owned files, so the merge never conflicts.
        for (int i = 0; i < side_commits; ++i) s += "\n" + commit("side", false);
        const int main_commits = int(rng() % 3);
        for (int i = 0; i < main_commits; ++i) s += "\n" + commit("main", true);
        if (rng() % 4 != 0) {
            s += fmt::format("\nmerge side into main\n  author {} <{}>\n  date {}\nend\n", names[0], emails[0], date());
            for (auto& [p, n] : branches["side"].files) branches["main"].files[p] = n;
        }
    }
    const int after = int(rng() % 6);
    for (int i = 0; i < after; ++i) s += "\n" + commit("main", true);
    return s;
}

}  // namespace testsupport
