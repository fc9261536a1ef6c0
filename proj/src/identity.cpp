#include <contribsum/error.hpp>
#include <contribsum/identity.hpp>

#include <algorithm>
#include <regex>
#include <set>

namespace contribsum {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> parts;
    std::size_t pos = 0;
    while (true) {
        auto next = s.find(sep, pos);
        parts.push_back(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    return parts;
}

}  // namespace

StudentId unmapped_student() { return StudentId{std::string(kUnmappedId), "Unmapped authors"}; }

const StudentId* Roster::find(std::string_view id) const {
    for (const auto& s : students) {
        if (s.id == id) return &s;
    }
    return nullptr;
}

std::string normalize_alias(std::string_view text) {
    auto t = trim(text);
    std::string out(t);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

Roster load_roster(std::string_view document) {
    Roster roster;
    std::map<std::string, std::set<std::string>> name_claims;
    std::size_t line_no = 0;
    for (auto raw : split(document, '\n')) {
        ++line_no;
        auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        auto fields = split(line, '|');
        if (fields.size() != 3) throw MalformedRoster(line_no, "expected 'id | display name | emails'");
        auto id = std::string(trim(fields[0]));
        auto display = std::string(trim(fields[1]));
        if (id.empty()) throw MalformedRoster(line_no, "empty student id");
        if (id == kUnmappedId) throw MalformedRoster(line_no, "'unmapped' is a reserved id");
        if (display.empty()) throw MalformedRoster(line_no, "empty display name");
        if (roster.find(id)) throw MalformedRoster(line_no, "duplicate student id '" + id + "'");
        roster.students.push_back(StudentId{id, display});
        auto& emails = roster.emails[id];
        for (auto e : split(fields[2], ',')) {
            auto email = normalize_alias(e);
            if (email.empty()) continue;
            if (email.find('@') == std::string::npos) {
                throw MalformedRoster(line_no, "invalid email '" + std::string(trim(e)) + "'");
            }
            auto [it, inserted] = roster.email_aliases.emplace(email, id);
            if (!inserted && it->second != id) {
                throw DuplicateAlias("email '" + email + "' claimed by both '" + it->second + "' and '" + id + "'");
            }
            if (inserted) emails.push_back(email);
        }
        name_claims[normalize_alias(display)].insert(id);
        name_claims[normalize_alias(id)].insert(id);
    }
    for (const auto& [name, ids] : name_claims) {
        if (ids.size() == 1) roster.name_aliases.emplace(name, *ids.begin());
    }
    return roster;
}

std::string serialize_roster(const Roster& roster) {
    std::string out;
    for (const auto& s : roster.students) {
        out += s.id + " | " + s.display_name + " | ";
        const auto it = roster.emails.find(s.id);
        if (it != roster.emails.end()) {
            for (std::size_t i = 0; i < it->second.size(); ++i) {
                if (i) out += ", ";
                out += it->second[i];
            }
        }
        out += "\n";
    }
    return out;
}

std::optional<StudentId> resolve(const Roster& roster, std::string_view name, std::string_view email) {
    if (auto it = roster.email_aliases.find(normalize_alias(email)); it != roster.email_aliases.end()) {
        return *roster.find(it->second);
    }
    if (auto it = roster.name_aliases.find(normalize_alias(name)); it != roster.name_aliases.end()) {
        return *roster.find(it->second);
    }
    return std::nullopt;
}

std::vector<CoAuthorTag> parse_coauthors(std::string_view message, std::string_view source_commit) {
    static const std::regex trailer(R"(^\s*co-authored-by:\s*(.*?)\s*<([^<>\s]+)>\s*$)", std::regex::icase);
    std::vector<CoAuthorTag> tags;
    for (auto line : split(message, '\n')) {
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        std::match_results<std::string_view::const_iterator> m;
        if (std::regex_match(line.begin(), line.end(), m, trailer) && m[1].length() > 0) {
            tags.push_back(CoAuthorTag{m[1].str(), m[2].str(), std::string(source_commit)});
        }
    }
    return tags;
}

}  // namespace contribsum
