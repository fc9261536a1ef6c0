#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace contribsum {

enum class FileKind { script, notebook, markup, other };

std::string_view to_string(FileKind kind);

/// 1-based inclusive physical line range.
struct LineRange {
    std::size_t first = 0;
    std::size_t last = 0;

    bool contains(std::size_t line) const noexcept { return first <= line && line <= last; }
    bool contains(const LineRange& other) const noexcept { return first <= other.first && other.last <= last; }
    bool operator==(const LineRange&) const = default;
};

struct FunctionSpan {
    /// Dotted with enclosing classes/functions, e.g. "Store.get" or "outer.inner".
    std::string name;
    LineRange span;

    bool operator==(const FunctionSpan&) const = default;
};

struct FunctionComplexity {
    std::string name;
    LineRange span;
    int score = 1;

    bool operator==(const FunctionComplexity&) const = default;
};

struct ComplexityReport {
    std::vector<FunctionComplexity> functions;
    int file_score = 1;
    /// Set when nothing could be segmented; file_score is then 1.
    bool unparsed = false;

    bool operator==(const ComplexityReport&) const = default;
};

struct FileMetrics {
    std::string path;
    std::size_t byte_size = 0;
    std::size_t line_count = 0;
    FileKind kind = FileKind::other;
    std::optional<ComplexityReport> complexity;  // script, notebook
    std::optional<std::size_t> tag_count;        // markup

    bool operator==(const FileMetrics&) const = default;
};

FileKind classify_file(std::string_view path, std::string_view content);

/// Tokenizer-level McCabe complexity for Python sources. Never throws on
/// broken code.
ComplexityReport cyclomatic(std::string_view source);

/// Same function set (names, spans) that `cyclomatic` scores.
std::vector<FunctionSpan> function_spans(std::string_view source);

/// Code cells of a notebook, in order, joined by a boundary comment line.
/// Throws MalformedNotebook.
std::string notebook_code(std::string_view document);

ComplexityReport notebook_complexity(std::string_view document);

/// Opening and self-closing tags; comments, closing tags, doctypes and
/// processing instructions are not counted.
std::size_t tag_count(std::string_view markup);

FileMetrics compute_metrics(std::string_view path, std::string_view content);

/// Per physical line: true when the line is blank or only a comment in the
/// file's language (best effort, by extension).
std::vector<bool> comment_or_blank_lines(std::string_view path, std::string_view content);

/// 1-based physical lines of a notebook's JSON that sit inside an "outputs"
/// array. Empty for non-notebooks or unparseable text.
std::vector<std::size_t> notebook_output_lines(std::string_view document);

}  // namespace contribsum
