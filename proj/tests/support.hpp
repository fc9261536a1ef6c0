#pragma once

#include <contribsum/attribution.hpp>
#include <contribsum/synthfix.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <unistd.h>

namespace testsupport {

class TempDir {
public:
    TempDir() {
        std::string tmpl = (std::filesystem::temp_directory_path() / "contribsum-test-XXXXXX").string();
        if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
        path_ = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
    std::filesystem::path path_;
};

/// Runs a shell command, returning its exit status.
inline int sh(const std::string& cmd) { return std::system((cmd + " >/dev/null 2>&1").c_str()); }

/// Runs a shell command and returns its standard output.
inline std::string capture(const std::string& cmd) {
    std::string out;
    if (FILE* pipe = popen(cmd.c_str(), "r")) {
        char buf[4096];
        std::size_t n;
        while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
        pclose(pipe);
    }
    return out;
}

/// Builds an inline fixture script into `dir`.
inline contribsum::synthfix::Built build_script(const std::string& text, const std::filesystem::path& dir) {
    return contribsum::synthfix::build(contribsum::synthfix::parse_script(text), dir);
}

/// Blame rows reduced to the fields ground truth predicts.
inline std::vector<contribsum::synthfix::TruthLine> as_truth(const std::vector<contribsum::LineAttribution>& rows) {
    std::vector<contribsum::synthfix::TruthLine> out;
    for (const auto& r : rows) {
        out.push_back({r.path, r.line_no, r.content, r.student ? r.student->id : std::string(contribsum::kUnmappedId),
                       r.commit});
    }
    return out;
}

}  // namespace testsupport
