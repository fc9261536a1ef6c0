#include <contribsum/error.hpp>
#include <contribsum/report.hpp>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <set>

using nlohmann::json;

namespace contribsum {

EvidenceIndex index_evidence(const ContributionSet& set) {
    EvidenceIndex out;
    for (const auto& [id, list] : set.per_student) {
        auto& files = out[id];
        for (const auto& e : list) files[e.path] = EvidenceDigest{e.lines_owned, e.lines_added_in_window};
    }
    return out;
}

ReportDocument build_report(std::vector<StudentSummary> summaries, TeamSummary team, RunMeta meta) {
    ReportDocument doc;
    doc.team = std::move(meta.team);
    doc.window = meta.window;
    doc.snapshot = std::move(meta.snapshot);
    doc.roles_enabled = meta.roles_enabled;
    std::stable_sort(summaries.begin(), summaries.end(), [](const auto& a, const auto& b) {
        return std::tie(a.student.display_name, a.student.id) < std::tie(b.student.display_name, b.student.id);
    });
    for (const auto& s : summaries) {
        for (const auto& f : s.validation.flags) {
            doc.warnings.push_back(fmt::format("{}: claim about {} flagged {}", s.student.display_name, f.path,
                                               to_string(f.reason)));
        }
    }
    for (const auto& a : meta.unmapped_authors) {
        doc.warnings.push_back("Commits by " + a + " match no roster entry and are not credited to any student.");
    }
    for (const auto& b : meta.supplements) {
        doc.warnings.push_back("Branch " + b.branch + " is not merged into the default branch; its lines are listed "
                               "separately and are not part of the summaries.");
    }
    for (auto& n : meta.notes) doc.warnings.push_back(std::move(n));
    doc.student_sections = std::move(summaries);
    doc.team_section = std::move(team);
    doc.supplements = std::move(meta.supplements);
    doc.evidence = std::move(meta.evidence);
    return doc;
}

std::string render_markdown(const ReportDocument& doc) {
    std::string out = fmt::format("# Contribution report: {}\n\n", doc.team);
    out += fmt::format("Window: {} ({} to {})\n", doc.window.label, format_utc(doc.window.start),
                       format_utc(doc.window.end));
    out += fmt::format("Snapshot: {}\n", doc.snapshot ? *doc.snapshot : std::string("none"));
    for (const auto& s : doc.student_sections) {
        out += fmt::format("\n## {}\n\n", s.student.display_name);
        out += fmt::format("Summary: {}\n", s.headline);
        if (!s.no_contributions) {
            out += "\nContributions:\n\n";
            for (const auto& b : s.per_file_bullets) {
                out += fmt::format("- {}: {}", b.path, b.text);
                for (const auto& f : s.validation.flags) {
                    if (f.path == b.path) out += fmt::format(" **[caution: {}]**", to_string(f.reason));
                }
                out += '\n';
            }
        }
        if (doc.roles_enabled && s.role) {
            out += fmt::format("\nRole: {}\n\n{}\n", s.role->label(), kRoleDisclaimer);
        }
    }
    out += "\n## Overall contribution of the team\n\n";
    out += doc.team_section.narrative + "\n";
    if (!doc.team_section.progress_bullets.empty()) {
        out += '\n';
        for (const auto& b : doc.team_section.progress_bullets) out += "- " + b + "\n";
    }
    if (!doc.supplements.empty()) {
        std::map<std::string, std::string> names;
        for (const auto& s : doc.student_sections) names[s.student.id] = s.student.display_name;
        out += "\n## Unmerged branches\n";
        for (const auto& b : doc.supplements) {
            out += fmt::format("\nBranch {} (tip {}, not merged):\n\n", b.branch, b.tip.substr(0, 12));
            if (b.unmerged_lines.empty()) out += "- no lines beyond the default branch\n";
            for (const auto& [id, files] : b.unmerged_lines) {
                const auto name = names.count(id) ? names.at(id) : id;
                for (const auto& [path, count] : files) {
                    out += fmt::format("- {}, {}: {} line(s) [unmerged]\n", name, path, count);
                }
            }
        }
    }
    if (!doc.warnings.empty()) {
        out += "\n## Warnings\n\n";
        for (const auto& w : doc.warnings) out += "- " + w + "\n";
    }
    return out;
}

std::string render(std::vector<StudentSummary> summaries, TeamSummary team, RunMeta meta) {
    return render_markdown(build_report(std::move(summaries), std::move(team), std::move(meta)));
}

std::string diff_windows(const ReportDocument& earlier, const ReportDocument& later) {
    if (earlier.team != later.team) {
        throw TeamMismatch("cannot compare reports of teams '" + earlier.team + "' and '" + later.team + "'");
    }
    std::map<std::string, std::string> names;
    for (const auto& s : earlier.student_sections) names[s.student.id] = s.student.display_name;
    for (const auto& s : later.student_sections) names[s.student.id] = s.student.display_name;
    std::set<std::string> ids;
    for (const auto& [id, _] : earlier.evidence) ids.insert(id);
    for (const auto& [id, _] : later.evidence) ids.insert(id);
    std::vector<std::string> ordered(ids.begin(), ids.end());
    auto name_of = [&](const std::string& id) { return names.count(id) ? names.at(id) : id; };
    std::stable_sort(ordered.begin(), ordered.end(),
                     [&](const auto& a, const auto& b) { return std::make_pair(name_of(a), a) < std::make_pair(name_of(b), b); });

    static const std::map<std::string, EvidenceDigest> none;
    std::string out;
    for (const auto& id : ordered) {
        const auto& before = earlier.evidence.count(id) ? earlier.evidence.at(id) : none;
        const auto& after = later.evidence.count(id) ? later.evidence.at(id) : none;
        std::string lines;
        for (const auto& [path, d] : after) {
            auto it = before.find(path);
            if (it == before.end()) {
                lines += fmt::format("- new: {} ({} lines owned, {} written this window)\n", path, d.lines_owned,
                                     d.lines_added_in_window);
            } else if (!(it->second == d)) {
                lines += fmt::format("- changed: {} (lines owned {} -> {}, written this window {} -> {})\n", path,
                                     it->second.lines_owned, d.lines_owned, it->second.lines_added_in_window,
                                     d.lines_added_in_window);
            }
        }
        for (const auto& [path, d] : before) {
            if (!after.count(path)) lines += fmt::format("- no longer credited: {}\n", path);
        }
        if (!lines.empty()) out += fmt::format("### {}\n\n{}\n", name_of(id), lines);
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json window_json(const AnalysisWindow& w) {
    return {{"start", format_utc(w.start)}, {"end", format_utc(w.end)}, {"label", w.label}};
}

AnalysisWindow window_from(const json& j) {
    return AnalysisWindow::make(parse_utc(j.at("start").get<std::string>()), parse_utc(j.at("end").get<std::string>()),
                                j.at("label").get<std::string>());
}

}  // namespace

json to_json(const StudentSummary& s) {
    json bullets = json::array();
    for (const auto& b : s.per_file_bullets) bullets.push_back({{"path", b.path}, {"text", b.text}});
    json flags = json::array();
    for (const auto& f : s.validation.flags) {
        flags.push_back({{"claim", f.claim}, {"path", f.path}, {"reason", to_string(f.reason)}});
    }
    return {{"student", {{"id", s.student.id}, {"display_name", s.student.display_name}}},
            {"headline", s.headline},
            {"per_file_bullets", bullets},
            {"role", s.role ? json(s.role->label()) : json(nullptr)},
            {"validation", {{"status", s.validation.status()}, {"flags", flags}}},
            {"no_contributions", s.no_contributions}};
}

StudentSummary student_summary_from_json(const json& j) {
    StudentSummary s;
    s.student = StudentId{j.at("student").at("id").get<std::string>(),
                          j.at("student").at("display_name").get<std::string>()};
    s.headline = j.at("headline").get<std::string>();
    for (const auto& b : j.at("per_file_bullets")) {
        s.per_file_bullets.push_back(FileBullet{b.at("path").get<std::string>(), b.at("text").get<std::string>()});
    }
    if (!j.at("role").is_null()) {
        s.role = RoleAssignment::parse(j.at("role").get<std::string>());
        if (!s.role) throw Error("unknown role in summary: " + j.at("role").get<std::string>());
    }
    for (const auto& f : j.at("validation").at("flags")) {
        auto reason = flag_reason_from_string(f.at("reason").get<std::string>());
        if (!reason) throw Error("unknown validation reason: " + f.at("reason").get<std::string>());
        s.validation.flags.push_back(
            ValidationFlag{f.at("claim").get<std::string>(), f.at("path").get<std::string>(), *reason});
    }
    s.no_contributions = j.at("no_contributions").get<bool>();
    return s;
}

json to_json(const TeamSummary& t) {
    return {{"window", window_json(t.window)}, {"narrative", t.narrative}, {"progress_bullets", t.progress_bullets}};
}

TeamSummary team_summary_from_json(const json& j) {
    return TeamSummary{window_from(j.at("window")), j.at("narrative").get<std::string>(),
                       j.at("progress_bullets").get<std::vector<std::string>>()};
}

json to_json(const ReportDocument& doc) {
    json students = json::array();
    for (const auto& s : doc.student_sections) students.push_back(to_json(s));
    json supplements = json::array();
    for (const auto& s : doc.supplements) {
        supplements.push_back({{"branch", s.branch}, {"tip", s.tip}, {"unmerged_lines", s.unmerged_lines}});
    }
    json evidence = json::object();
    for (const auto& [id, files] : doc.evidence) {
        json f = json::object();
        for (const auto& [path, d] : files) {
            f[path] = {{"lines_owned", d.lines_owned}, {"lines_added_in_window", d.lines_added_in_window}};
        }
        evidence[id] = f;
    }
    return {{"team", doc.team},
            {"window", window_json(doc.window)},
            {"snapshot", doc.snapshot ? json(*doc.snapshot) : json(nullptr)},
            {"roles_enabled", doc.roles_enabled},
            {"students", students},
            {"team_section", to_json(doc.team_section)},
            {"supplements", supplements},
            {"warnings", doc.warnings},
            {"evidence", evidence}};
}

ReportDocument report_from_json(const json& j) {
    ReportDocument doc;
    doc.team = j.at("team").get<std::string>();
    doc.window = window_from(j.at("window"));
    if (!j.at("snapshot").is_null()) doc.snapshot = j.at("snapshot").get<std::string>();
    doc.roles_enabled = j.at("roles_enabled").get<bool>();
    for (const auto& s : j.at("students")) doc.student_sections.push_back(student_summary_from_json(s));
    doc.team_section = team_summary_from_json(j.at("team_section"));
    for (const auto& s : j.at("supplements")) {
        BranchSupplement b;
        b.branch = s.at("branch").get<std::string>();
        b.tip = s.at("tip").get<std::string>();
        b.unmerged_lines = s.at("unmerged_lines").get<std::map<std::string, std::map<std::string, std::size_t>>>();
        doc.supplements.push_back(std::move(b));
    }
    doc.warnings = j.at("warnings").get<std::vector<std::string>>();
    for (const auto& [id, files] : j.at("evidence").items()) {
        for (const auto& [path, d] : files.items()) {
            doc.evidence[id][path] =
                EvidenceDigest{d.at("lines_owned").get<std::size_t>(), d.at("lines_added_in_window").get<std::size_t>()};
        }
    }
    return doc;
}

}  // namespace contribsum
