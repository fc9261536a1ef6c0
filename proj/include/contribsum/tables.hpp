#pragma once

#include <contribsum/attribution.hpp>
#include <contribsum/metrics.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace contribsum {

struct FunctionalityRow {
    std::string path;
    std::string functionality;
    std::string difficulty;
    FileMetrics metrics;

    bool operator==(const FunctionalityRow&) const = default;
};

struct ContributionRow {
    StudentId student;
    std::string path;
    std::string description;
    ContributionEvidence evidence;

    bool operator==(const ContributionRow&) const = default;
};

struct FunctionalityTable {
    std::vector<FunctionalityRow> rows;

    static const std::vector<std::string>& columns();
    bool operator==(const FunctionalityTable&) const = default;
};

struct ContributionTable {
    std::vector<ContributionRow> rows;

    static const std::vector<std::string>& columns();
    bool operator==(const ContributionTable&) const = default;
};

/// The CSV carries file-level metrics and evidence counts only. These
/// return the row as `read_csv` would reconstruct it.
FunctionalityRow csv_projection(FunctionalityRow row);
ContributionRow csv_projection(ContributionRow row);

/// "Display Name (id)"; the inverse of parse_student_cell.
std::string student_cell(const StudentId& s);
StudentId parse_student_cell(std::string_view cell);

/// RFC 4180 text (CRLF record separators, header row, rows in key order).
/// Throws PreconditionViolation on duplicate keys.
std::string to_csv(const FunctionalityTable& table);
std::string to_csv(const ContributionTable& table);

/// Throws SchemaMismatch naming the first unexpected or missing column,
/// MalformedCsv with a 1-based line number.
FunctionalityTable functionality_from_csv(std::string_view text);
ContributionTable contribution_from_csv(std::string_view text);

/// Writes atomically; returns bytes written. Throws IoError.
std::size_t write_csv(const FunctionalityTable& table, const std::filesystem::path& destination);
std::size_t write_csv(const ContributionTable& table, const std::filesystem::path& destination);

FunctionalityTable read_functionality_csv(const std::filesystem::path& source);
ContributionTable read_contribution_csv(const std::filesystem::path& source);

/// Generic RFC 4180 record splitting, exposed for tests.
std::vector<std::vector<std::string>> parse_csv_records(std::string_view text);
std::string csv_field(std::string_view value);

}  // namespace contribsum
