#include <contribsum/error.hpp>
#include <contribsum/fsutil.hpp>
#include <contribsum/tables.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <set>

namespace contribsum {

const std::vector<std::string>& FunctionalityTable::columns() {
    static const std::vector<std::string> cols{"Filename",  "Functionality", "Difficulty", "ByteSize",
                                               "LineCount", "Complexity",    "TagCount"};
    return cols;
}

const std::vector<std::string>& ContributionTable::columns() {
    static const std::vector<std::string> cols{"Student",     "File", "Description", "LinesOwned",
                                               "LinesAddedInWindow", "SoloFunctions"};
    return cols;
}

namespace {

FileKind kind_from_path(std::string_view path) { return classify_file(path, std::string_view{}); }

std::string join_solo(const std::vector<SoloFunction>& fns) {
    std::string out;
    for (const auto& f : fns) {
        if (!out.empty()) out += "; ";
        out += fmt::format("{}:{}", f.name, f.complexity);
    }
    return out;
}

template <typename T>
T to_number(std::string_view cell, std::size_t line, std::string_view column) {
    T value{};
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
        throw MalformedCsv(line, fmt::format("column {} expects a number, got '{}'", column, cell));
    }
    return value;
}

std::vector<SoloFunction> split_solo(std::string_view cell, std::size_t line) {
    std::vector<SoloFunction> out;
    while (!cell.empty()) {
        auto semi = cell.find(';');
        auto item = cell.substr(0, semi);
        cell = semi == std::string_view::npos ? std::string_view{} : cell.substr(semi + 1);
        while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
        if (item.empty()) continue;
        auto colon = item.rfind(':');
        if (colon == std::string_view::npos) throw MalformedCsv(line, "SoloFunctions entry without ':'");
        out.push_back(SoloFunction{std::string(item.substr(0, colon)),
                                   to_number<int>(item.substr(colon + 1), line, "SoloFunctions")});
    }
    return out;
}

std::string render(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
    std::string out;
    auto emit = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += csv_field(cells[i]);
        }
        out += "\r\n";
    };
    emit(header);
    for (const auto& r : rows) emit(r);
    return out;
}

struct Parsed {
    std::vector<std::vector<std::string>> records;
    std::vector<std::size_t> lines;  // first physical line of each record
};

Parsed parse_with_lines(std::string_view text) {
    Parsed p;
    std::size_t i = 0;
    std::size_t line = 1;
    if (text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;
    while (i < text.size()) {
        std::vector<std::string> record;
        const std::size_t record_line = line;
        while (true) {
            std::string field;
            if (i < text.size() && text[i] == '"') {
                const std::size_t open_line = line;
                ++i;
                while (true) {
                    if (i >= text.size()) throw MalformedCsv(open_line, "unterminated quoted field");
                    char c = text[i++];
                    if (c == '"') {
                        if (i < text.size() && text[i] == '"') {
                            field += '"';
                            ++i;
                        } else {
                            break;
                        }
                    } else {
                        if (c == '\n') ++line;
                        field += c;
                    }
                }
                if (i < text.size() && text[i] != ',' && text[i] != '\r' && text[i] != '\n') {
                    throw MalformedCsv(line, "unexpected character after closing quote");
                }
            } else {
                while (i < text.size() && text[i] != ',' && text[i] != '\r' && text[i] != '\n') {
                    if (text[i] == '"') throw MalformedCsv(line, "quote inside unquoted field");
                    field += text[i++];
                }
            }
            record.push_back(std::move(field));
            if (i < text.size() && text[i] == ',') {
                ++i;
                continue;
            }
            break;
        }
        if (i < text.size() && text[i] == '\r') ++i;
        if (i < text.size() && text[i] == '\n') {
            ++i;
            ++line;
        }
        p.records.push_back(std::move(record));
        p.lines.push_back(record_line);
    }
    return p;
}

void check_header(const std::vector<std::string>& got, const std::vector<std::string>& want) {
    for (std::size_t i = 0; i < want.size(); ++i) {
        if (i >= got.size()) throw SchemaMismatch(want[i]);
        if (got[i] != want[i]) {
            // Name the expected column when it is missing entirely, else the stray one.
            bool present = std::find(got.begin(), got.end(), want[i]) != got.end();
            throw SchemaMismatch(present ? got[i] : want[i]);
        }
    }
    if (got.size() > want.size()) throw SchemaMismatch(got[want.size()]);
}

Parsed parse_table(std::string_view text, const std::vector<std::string>& header) {
    auto p = parse_with_lines(text);
    if (p.records.empty()) throw SchemaMismatch(header.front());
    check_header(p.records.front(), header);
    for (std::size_t r = 1; r < p.records.size(); ++r) {
        if (p.records[r].size() != header.size()) {
            throw MalformedCsv(p.lines[r], fmt::format("expected {} fields, found {}", header.size(),
                                                       p.records[r].size()));
        }
    }
    return p;
}

}  // namespace

std::string csv_field(std::string_view value) {
    if (value.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(value);
    std::string out = "\"";
    for (char c : value) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::vector<std::vector<std::string>> parse_csv_records(std::string_view text) {
    return parse_with_lines(text).records;
}

std::string student_cell(const StudentId& s) {
    if (s.display_name.empty() || s.display_name == s.id) return s.id;
    return s.display_name + " (" + s.id + ")";
}

StudentId parse_student_cell(std::string_view cell) {
    if (!cell.empty() && cell.back() == ')') {
        auto open = cell.rfind(" (");
        if (open != std::string_view::npos) {
            return StudentId{std::string(cell.substr(open + 2, cell.size() - open - 3)),
                             std::string(cell.substr(0, open))};
        }
    }
    return StudentId{std::string(cell), std::string(cell)};
}

FunctionalityRow csv_projection(FunctionalityRow row) {
    auto& m = row.metrics;
    m.path = row.path;
    m.kind = kind_from_path(row.path);
    if (m.complexity) m.complexity = ComplexityReport{{}, m.complexity->file_score, false};
    return row;
}

ContributionRow csv_projection(ContributionRow row) {
    if (row.student.display_name.empty()) row.student.display_name = row.student.id;
    auto& e = row.evidence;
    ContributionEvidence kept;
    kept.student = row.student;
    kept.path = row.path;
    kept.lines_owned = e.lines_owned;
    kept.lines_added_in_window = e.lines_added_in_window;
    kept.solo_functions = e.solo_functions;
    e = std::move(kept);
    return row;
}

std::string to_csv(const FunctionalityTable& table) {
    std::vector<const FunctionalityRow*> rows;
    for (const auto& r : table.rows) rows.push_back(&r);
    std::sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->path < b->path; });
    std::vector<std::vector<std::string>> cells;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = *rows[i];
        if (i && rows[i - 1]->path == r.path) throw PreconditionViolation("duplicate Filename " + r.path);
        const auto& m = r.metrics;
        cells.push_back({r.path, r.functionality, r.difficulty, std::to_string(m.byte_size),
                         std::to_string(m.line_count), m.complexity ? std::to_string(m.complexity->file_score) : "",
                         m.tag_count ? std::to_string(*m.tag_count) : ""});
    }
    return render(FunctionalityTable::columns(), cells);
}

std::string to_csv(const ContributionTable& table) {
    std::vector<const ContributionRow*> rows;
    for (const auto& r : table.rows) rows.push_back(&r);
    auto key = [](const ContributionRow* r) { return std::tie(r->student.id, r->path); };
    std::sort(rows.begin(), rows.end(), [&](auto* a, auto* b) { return key(a) < key(b); });
    std::vector<std::vector<std::string>> cells;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = *rows[i];
        if (i && key(rows[i - 1]) == key(rows[i])) {
            throw PreconditionViolation("duplicate (Student, File) " + r.student.id + ", " + r.path);
        }
        cells.push_back({student_cell(r.student), r.path, r.description, std::to_string(r.evidence.lines_owned),
                         std::to_string(r.evidence.lines_added_in_window), join_solo(r.evidence.solo_functions)});
    }
    return render(ContributionTable::columns(), cells);
}

FunctionalityTable functionality_from_csv(std::string_view text) {
    auto p = parse_table(text, FunctionalityTable::columns());
    FunctionalityTable t;
    std::set<std::string> seen;
    for (std::size_t r = 1; r < p.records.size(); ++r) {
        const auto& c = p.records[r];
        const auto line = p.lines[r];
        if (!seen.insert(c[0]).second) throw MalformedCsv(line, "duplicate Filename " + c[0]);
        FunctionalityRow row;
        row.path = c[0];
        row.functionality = c[1];
        row.difficulty = c[2];
        row.metrics.path = c[0];
        row.metrics.kind = kind_from_path(c[0]);
        row.metrics.byte_size = to_number<std::size_t>(c[3], line, "ByteSize");
        row.metrics.line_count = to_number<std::size_t>(c[4], line, "LineCount");
        if (!c[5].empty()) row.metrics.complexity = ComplexityReport{{}, to_number<int>(c[5], line, "Complexity"), false};
        if (!c[6].empty()) row.metrics.tag_count = to_number<std::size_t>(c[6], line, "TagCount");
        t.rows.push_back(std::move(row));
    }
    return t;
}

ContributionTable contribution_from_csv(std::string_view text) {
    auto p = parse_table(text, ContributionTable::columns());
    ContributionTable t;
    std::set<std::pair<std::string, std::string>> seen;
    for (std::size_t r = 1; r < p.records.size(); ++r) {
        const auto& c = p.records[r];
        const auto line = p.lines[r];
        ContributionRow row;
        row.student = parse_student_cell(c[0]);
        row.path = c[1];
        if (!seen.insert({row.student.id, row.path}).second) {
            throw MalformedCsv(line, "duplicate (Student, File) " + row.student.id + ", " + row.path);
        }
        row.description = c[2];
        row.evidence.student = row.student;
        row.evidence.path = row.path;
        row.evidence.lines_owned = to_number<std::size_t>(c[3], line, "LinesOwned");
        row.evidence.lines_added_in_window = to_number<std::size_t>(c[4], line, "LinesAddedInWindow");
        row.evidence.solo_functions = split_solo(c[5], line);
        t.rows.push_back(std::move(row));
    }
    return t;
}

std::size_t write_csv(const FunctionalityTable& table, const std::filesystem::path& destination) {
    auto text = to_csv(table);
    write_file_atomic(destination, text);
    return text.size();
}

std::size_t write_csv(const ContributionTable& table, const std::filesystem::path& destination) {
    auto text = to_csv(table);
    write_file_atomic(destination, text);
    return text.size();
}

FunctionalityTable read_functionality_csv(const std::filesystem::path& source) {
    return functionality_from_csv(read_file(source));
}

ContributionTable read_contribution_csv(const std::filesystem::path& source) {
    return contribution_from_csv(read_file(source));
}

}  // namespace contribsum
