#pragma once

// Lays out a fixture as a one-team course directory (bare repo, roster,
// sprint text, config) so the full pipeline can run against it.

#include <contribsum/config.hpp>
#include <contribsum/fsutil.hpp>
#include <contribsum/pipeline.hpp>
#include <contribsum/synthfix.hpp>

#include <fmt/format.h>

#include <filesystem>
#include <string>

namespace testsupport {

inline const char* kSprintText =
    "Sprint goals: build the login flow and a landing page, expose a health endpoint, add tests, and document how "
    "to run the app.\n";
inline const char* kProjectText =
    "A small Flask web application for a course project with a data pipeline and an HTML front end.\n";

struct CourseDir {
    std::filesystem::path root;
    std::filesystem::path config;
};

inline CourseDir lay_out_fixture(const contribsum::synthfix::RepoScript& script, const std::filesystem::path& root,
                                 const std::string& extra_run_lines = "") {
    namespace fs = std::filesystem;
    fs::create_directories(root);
    contribsum::synthfix::build(script, root / "repo.git");
    contribsum::write_file_atomic(root / "roster.txt", script.roster_text);
    contribsum::write_file_atomic(root / "sprint.md", kSprintText);
    contribsum::write_file_atomic(root / "project.md", kProjectText);
    const auto& w = *script.window;
    auto ini = fmt::format(
        "[run]\nroster = roster.txt\nsprint_instructions = sprint.md\nproject_description = project.md\n"
        "window_start = {}\nwindow_end = {}\nwindow_label = {}\noutput_dir = out\nstate_dir = state\n{}"
        "\n[teams]\n{} = repo.git\n",
        contribsum::format_utc(w.start), contribsum::format_utc(w.end), w.label, extra_run_lines, script.name);
    contribsum::write_file_atomic(root / "run.ini", ini);
    return CourseDir{root, root / "run.ini"};
}

}  // namespace testsupport
