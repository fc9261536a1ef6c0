#pragma once

#include <compare>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace contribsum {

struct StudentId {
    std::string id;
    std::string display_name;

    auto operator<=>(const StudentId&) const = default;
};

/// Reserved pseudo-student under which unresolved authors aggregate.
inline constexpr std::string_view kUnmappedId = "unmapped";
StudentId unmapped_student();

struct Roster {
    std::vector<StudentId> students;
    /// normalized email -> student id
    std::map<std::string, std::string> email_aliases;
    /// normalized display name (and normalized id) -> student id
    std::map<std::string, std::string> name_aliases;
    /// per student, emails in the order they were declared
    std::map<std::string, std::vector<std::string>> emails;

    const StudentId* find(std::string_view id) const;
};

/// Lowercases ASCII and trims surrounding whitespace.
std::string normalize_alias(std::string_view text);

/// Parses `id | display name | email1, email2, ...` lines; blank lines and
/// `#` comments are skipped. Names shared by two students are not usable as
/// aliases (emails still are).
Roster load_roster(std::string_view document);

/// Inverse of load_roster (canonical form).
std::string serialize_roster(const Roster& roster);

/// Email alias wins over name alias; nullopt means the author is unknown.
std::optional<StudentId> resolve(const Roster& roster, std::string_view name, std::string_view email);

struct CoAuthorTag {
    std::string name;
    std::string email;
    std::string source_commit;

    bool operator==(const CoAuthorTag&) const = default;
};

/// One tag per well-formed "Co-authored-by: NAME <EMAIL>" line, in order.
std::vector<CoAuthorTag> parse_coauthors(std::string_view message, std::string_view source_commit = {});

}  // namespace contribsum
