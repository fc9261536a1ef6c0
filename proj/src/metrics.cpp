#include <contribsum/error.hpp>
#include <contribsum/linediff.hpp>
#include <contribsum/metrics.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cctype>

namespace contribsum {

std::string_view to_string(FileKind kind) {
    switch (kind) {
        case FileKind::script: return "script";
        case FileKind::notebook: return "notebook";
        case FileKind::markup: return "markup";
        case FileKind::other: return "other";
    }
    return "other";
}

namespace {

std::string lower_extension(std::string_view path) {
    auto slash = path.rfind('/');
    auto base = slash == std::string_view::npos ? path : path.substr(slash + 1);
    auto dot = base.rfind('.');
    if (dot == std::string_view::npos || dot == 0) return {};
    std::string ext(base.substr(dot));
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

// ---------------------------------------------------------------------------
// Python tokenizer: just enough structure for logical lines, bracket depth,
// keywords and strings. Comments never produce tokens.

struct Token {
    enum class Kind { name, op, string, number };
    Kind kind;
    std::string_view text;
    int depth = 0;  // bracket depth before this token
};

struct LogicalLine {
    std::vector<Token> tokens;
    std::size_t first_line = 0;
    std::size_t last_line = 0;
    int indent = 0;
};

bool is_ident_start(unsigned char c) { return std::isalpha(c) || c == '_' || c >= 0x80; }
bool is_ident_char(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }

bool is_string_prefix(std::string_view word) {
    if (word.size() > 2) return false;
    for (char c : word) {
        switch (std::tolower(static_cast<unsigned char>(c))) {
            case 'r': case 'u': case 'b': case 'f': break;
            default: return false;
        }
    }
    return true;
}

std::vector<LogicalLine> tokenize(std::string_view src) {
    std::vector<LogicalLine> lines;
    LogicalLine current;
    std::size_t pos = 0;
    std::size_t line = 1;
    std::size_t line_start = 0;
    int depth = 0;

    auto column_of = [&](std::size_t at) {
        int col = 0;
        for (std::size_t i = line_start; i < at; ++i) {
            if (src[i] == '\t') col = (col / 8 + 1) * 8;
            else ++col;
        }
        return col;
    };
    auto emit = [&](Token::Kind kind, std::size_t begin, std::size_t end, std::size_t token_line) {
        if (current.tokens.empty()) {
            current.first_line = token_line;
            current.indent = column_of(begin);
        }
        current.tokens.push_back(Token{kind, src.substr(begin, end - begin), depth});
        current.last_line = line;
    };
    auto finish = [&] {
        if (!current.tokens.empty()) lines.push_back(std::move(current));
        current = LogicalLine{};
    };

    while (pos < src.size()) {
        const auto c = static_cast<unsigned char>(src[pos]);
        if (c == '\n') {
            ++line;
            line_start = pos + 1;
            ++pos;
            if (depth == 0) finish();
            continue;
        }
        if (c == '\\' && pos + 1 < src.size() && (src[pos + 1] == '\n' || src[pos + 1] == '\r')) {
            pos += src[pos + 1] == '\r' && pos + 2 < src.size() && src[pos + 2] == '\n' ? 3 : 2;
            ++line;
            line_start = pos;
            continue;
        }
        if (c == '#') {
            while (pos < src.size() && src[pos] != '\n') ++pos;
            continue;
        }
        if (c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v') {
            ++pos;
            continue;
        }
        std::size_t begin = pos;
        std::size_t token_line = line;
        if (is_ident_start(c)) {
            while (pos < src.size() && is_ident_char(static_cast<unsigned char>(src[pos]))) ++pos;
            auto word = src.substr(begin, pos - begin);
            if (!(pos < src.size() && (src[pos] == '\'' || src[pos] == '"') && is_string_prefix(word))) {
                emit(Token::Kind::name, begin, pos, token_line);
                continue;
            }
        }
        if (pos < src.size() && (src[pos] == '\'' || src[pos] == '"')) {
            const char quote = src[pos];
            const bool triple = pos + 2 < src.size() && src[pos + 1] == quote && src[pos + 2] == quote;
            pos += triple ? 3 : 1;
            while (pos < src.size()) {
                const char d = src[pos];
                if (d == '\\' && pos + 1 < src.size()) {
                    if (src[pos + 1] == '\n') {
                        ++line;
                        line_start = pos + 2;
                    }
                    pos += 2;
                    continue;
                }
                if (d == '\n') {
                    if (!triple) break;  // unterminated single-quoted string: recover at end of line
                    ++line;
                    line_start = pos + 1;
                    ++pos;
                    continue;
                }
                if (d == quote) {
                    if (!triple) {
                        ++pos;
                        break;
                    }
                    if (pos + 2 < src.size() && src[pos + 1] == quote && src[pos + 2] == quote) {
                        pos += 3;
                        break;
                    }
                }
                ++pos;
            }
            emit(Token::Kind::string, begin, pos, token_line);
            continue;
        }
        if (std::isdigit(c)) {
            while (pos < src.size() && (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '.' ||
                                        src[pos] == '_')) {
                ++pos;
            }
            emit(Token::Kind::number, begin, pos, token_line);
            continue;
        }
        ++pos;
        if (c == '(' || c == '[' || c == '{') {
            emit(Token::Kind::op, begin, pos, token_line);
            ++depth;
        } else if (c == ')' || c == ']' || c == '}') {
            depth = std::max(0, depth - 1);
            emit(Token::Kind::op, begin, pos, token_line);
        } else {
            emit(Token::Kind::op, begin, pos, token_line);
        }
    }
    finish();
    return lines;
}

bool is_name(const Token& t, std::string_view word) { return t.kind == Token::Kind::name && t.text == word; }

std::size_t effective_start(const LogicalLine& l) {
    if (l.tokens.size() > 1 && is_name(l.tokens[0], "async")) return 1;
    return 0;
}

int decision_points(const LogicalLine& l) {
    int count = 0;
    const auto start = effective_start(l);
    for (std::size_t i = 0; i < l.tokens.size(); ++i) {
        const auto& t = l.tokens[i];
        if (t.kind != Token::Kind::name) continue;
        if (t.text == "if" || t.text == "elif" || t.text == "and" || t.text == "or" || t.text == "except") {
            ++count;
        } else if ((t.text == "for" || t.text == "while") && t.depth == 0) {
            ++count;  // statement loops; comprehension `for` clauses sit inside brackets
        }
    }
    const auto& first = l.tokens[start];
    if (is_name(first, "case") && l.tokens.size() > start + 2 && l.tokens.back().text == ":" &&
        l.tokens[start + 1].text != "=" && l.tokens[start + 1].text != "." && l.tokens.back().depth == 0) {
        ++count;
    }
    return count;
}

bool is_top_level_logic(const LogicalLine& l) {
    const auto& first = l.tokens[effective_start(l)];
    if (first.kind == Token::Kind::op && first.text == "@") return false;
    for (std::string_view kw : {"import", "from", "class", "pass", "def"}) {
        if (is_name(first, kw)) return false;
    }
    return !std::all_of(l.tokens.begin(), l.tokens.end(), [](const Token& t) { return t.kind == Token::Kind::string; });
}

struct Analysis {
    std::vector<LogicalLine> lines;
    struct Fn {
        std::string name;
        std::size_t begin = 0;  // logical line indices, inclusive
        std::size_t end = 0;
        LineRange span;
        int score = 1;
    };
    std::vector<Fn> functions;
    bool has_top_level = false;
};

Analysis analyze(std::string_view source) {
    Analysis a;
    a.lines = tokenize(source);
    const auto& lines = a.lines;

    struct Scope {
        int indent;
        std::string name;
    };
    std::vector<Scope> scopes;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto& l = lines[i];
        const auto start = effective_start(l);
        const bool is_def = is_name(l.tokens[start], "def");
        const bool is_class = is_name(l.tokens[start], "class");
        if (!is_def && !is_class) continue;
        while (!scopes.empty() && scopes.back().indent >= l.indent) scopes.pop_back();
        std::string name = start + 1 < l.tokens.size() && l.tokens[start + 1].kind == Token::Kind::name
                               ? std::string(l.tokens[start + 1].text)
                               : std::string("<anonymous>");
        std::string qualified;
        for (const auto& s : scopes) qualified += s.name + ".";
        qualified += name;
        scopes.push_back(Scope{l.indent, name});
        if (!is_def) continue;
        std::size_t end = i;
        while (end + 1 < lines.size() && lines[end + 1].indent > l.indent) ++end;
        a.functions.push_back(Analysis::Fn{qualified, i, end, LineRange{l.first_line, lines[end].last_line}, 1});
    }

    for (std::size_t i = 0; i < lines.size(); ++i) {
        // Innermost enclosing function: the latest-starting one that covers i.
        Analysis::Fn* owner = nullptr;
        for (auto& fn : a.functions) {
            if (fn.begin <= i && i <= fn.end) owner = &fn;
        }
        if (owner) {
            owner->score += decision_points(lines[i]);
        } else if (is_top_level_logic(lines[i])) {
            a.has_top_level = true;
        }
    }
    return a;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool iequals_prefix(std::string_view text, std::size_t pos, std::string_view word) {
    if (pos + word.size() > text.size()) return false;
    for (std::size_t i = 0; i < word.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(text[pos + i])) != word[i]) return false;
    }
    return true;
}

}  // namespace

FileKind classify_file(std::string_view path, std::string_view content) {
    if (diff::looks_binary(content)) return FileKind::other;
    const auto ext = lower_extension(path);
    if (ext == ".py") return FileKind::script;
    if (ext == ".ipynb") return FileKind::notebook;
    if (ext == ".html" || ext == ".htm") return FileKind::markup;
    return FileKind::other;
}

ComplexityReport cyclomatic(std::string_view source) {
    auto a = analyze(source);
    ComplexityReport report;
    if (a.lines.empty()) {
        report.file_score = 1;
        report.unparsed = true;
        return report;
    }
    int total = 0;
    for (const auto& fn : a.functions) {
        report.functions.push_back(FunctionComplexity{fn.name, fn.span, fn.score});
        total += fn.score;
    }
    if (a.has_top_level) total += 1;
    report.file_score = std::max(1, total);
    return report;
}

std::vector<FunctionSpan> function_spans(std::string_view source) {
    std::vector<FunctionSpan> spans;
    for (const auto& fn : analyze(source).functions) spans.push_back(FunctionSpan{fn.name, fn.span});
    return spans;
}

std::string notebook_code(std::string_view document) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(document);
    } catch (const nlohmann::json::parse_error& e) {
        throw MalformedNotebook(std::string("notebook is not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("cells") || !doc["cells"].is_array()) {
        throw MalformedNotebook("notebook has no 'cells' array");
    }
    std::string out;
    bool first = true;
    for (const auto& cell : doc["cells"]) {
        if (!cell.is_object() || cell.value("cell_type", "") != "code") continue;
        std::string text;
        const auto& source = cell.contains("source") ? cell["source"] : nlohmann::json();
        if (source.is_string()) {
            text = source.get<std::string>();
        } else if (source.is_array()) {
            for (const auto& part : source) {
                if (!part.is_string()) throw MalformedNotebook("cell source entries must be strings");
                text += part.get<std::string>();
            }
        } else if (!source.is_null()) {
            throw MalformedNotebook("cell source must be a string or list of strings");
        }
        // IPython magics and shell escapes are not Python; neutralize them.
        std::string cleaned;
        for (auto raw : diff::split_lines(text)) {
            if (!raw.empty() && (raw.front() == '%' || raw.front() == '!')) cleaned += "# ";
            cleaned.append(raw);
            cleaned += '\n';
        }
        if (!first) out += "# %% ---- cell boundary ----\n";
        out += cleaned;
        first = false;
    }
    return out;
}

ComplexityReport notebook_complexity(std::string_view document) { return cyclomatic(notebook_code(document)); }

std::size_t tag_count(std::string_view m) {
    std::size_t count = 0;
    std::size_t pos = 0;
    auto skip_past = [&](std::string_view terminator) {
        auto at = m.find(terminator, pos);
        pos = at == std::string_view::npos ? m.size() : at + terminator.size();
    };
    while (pos < m.size()) {
        if (m[pos] != '<') {
            ++pos;
            continue;
        }
        if (m.compare(pos, 4, "<!--") == 0) {
            pos += 4;
            skip_past("-->");
            continue;
        }
        if (pos + 1 < m.size() && (m[pos + 1] == '/' || m[pos + 1] == '!' || m[pos + 1] == '?')) {
            ++pos;
            skip_past(">");
            continue;
        }
        if (pos + 1 >= m.size() || !std::isalpha(static_cast<unsigned char>(m[pos + 1]))) {
            ++pos;
            continue;
        }
        std::size_t name_begin = pos + 1;
        std::size_t q = name_begin;
        while (q < m.size() && (std::isalnum(static_cast<unsigned char>(m[q])) || m[q] == '-' || m[q] == ':')) ++q;
        std::string name(m.substr(name_begin, q - name_begin));
        std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
        char quote = 0;
        bool self_closing = false;
        while (q < m.size()) {
            const char c = m[q];
            if (quote) {
                if (c == quote) quote = 0;
            } else if (c == '"' || c == '\'') {
                quote = c;
            } else if (c == '>') {
                self_closing = q > 0 && m[q - 1] == '/';
                break;
            }
            ++q;
        }
        ++count;
        pos = q < m.size() ? q + 1 : m.size();
        if (!self_closing && (name == "script" || name == "style")) {
            // Raw text content: skip to the matching close tag.
            std::string close = "</" + name;
            while (pos < m.size() && !iequals_prefix(m, pos, close)) ++pos;
        }
    }
    return count;
}

FileMetrics compute_metrics(std::string_view path, std::string_view content) {
    FileMetrics metrics;
    metrics.path = std::string(path);
    metrics.byte_size = content.size();
    metrics.kind = classify_file(path, content);
    metrics.line_count = metrics.kind == FileKind::other && diff::looks_binary(content)
                             ? 0
                             : diff::split_lines(content).size();
    switch (metrics.kind) {
        case FileKind::script: metrics.complexity = cyclomatic(content); break;
        case FileKind::notebook:
            try {
                metrics.complexity = notebook_complexity(content);
            } catch (const MalformedNotebook&) {
                metrics.complexity = ComplexityReport{{}, 1, true};
            }
            break;
        case FileKind::markup: metrics.tag_count = tag_count(content); break;
        case FileKind::other: break;
    }
    return metrics;
}

std::vector<bool> comment_or_blank_lines(std::string_view path, std::string_view content) {
    const auto ext = lower_extension(path);
    const auto lines = diff::split_lines(content);
    std::vector<bool> out(lines.size(), false);
    static constexpr std::array hash_exts = {".py", ".sh", ".rb", ".r", ".yml", ".yaml", ".toml", ".cfg", ".ini", ".pl"};
    static constexpr std::array slash_exts = {".js", ".ts", ".jsx", ".tsx", ".java", ".c", ".h", ".cpp", ".hpp",
                                              ".cc", ".cs", ".go", ".rs", ".kt", ".swift", ".css", ".scss", ".php"};
    const bool hash_style = std::find(hash_exts.begin(), hash_exts.end(), ext) != hash_exts.end();
    const bool slash_style = std::find(slash_exts.begin(), slash_exts.end(), ext) != slash_exts.end();
    const bool markup = ext == ".html" || ext == ".htm" || ext == ".xml" || ext == ".md";
    const bool sql_style = ext == ".sql" || ext == ".lua";
    bool in_block = false;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        auto t = trim(lines[i]);
        if (t.empty()) {
            out[i] = true;
            continue;
        }
        if (ext == ".ipynb") {
            // JSON-encoded cell source lines: "# comment\n",
            out[i] = t.rfind("\"#", 0) == 0 || t.rfind("\"\\n\"", 0) == 0;
        } else if (hash_style) {
            out[i] = t.front() == '#';
        } else if (sql_style) {
            out[i] = t.rfind("--", 0) == 0;
        } else if (slash_style) {
            if (in_block) {
                out[i] = true;
                if (t.find("*/") != std::string_view::npos) in_block = false;
            } else if (t.rfind("//", 0) == 0) {
                out[i] = true;
            } else if (t.rfind("/*", 0) == 0) {
                out[i] = true;
                auto close = t.find("*/", 2);
                if (close == std::string_view::npos) in_block = true;
                else out[i] = trim(t.substr(close + 2)).empty();
            }
        } else if (markup) {
            if (in_block) {
                out[i] = true;
                if (t.find("-->") != std::string_view::npos) in_block = false;
            } else if (t.rfind("<!--", 0) == 0) {
                auto close = t.find("-->");
                out[i] = close == std::string_view::npos || trim(t.substr(close + 3)).empty();
                if (close == std::string_view::npos) in_block = true;
            }
        }
    }
    return out;
}

std::vector<std::size_t> notebook_output_lines(std::string_view document) {
    std::vector<std::size_t> out;
    const auto lines = diff::split_lines(document);
    // Track JSON nesting with string awareness; mark lines whose start lies
    // inside an "outputs" array.
    int depth = 0;
    int outputs_depth = -1;  // nesting depth of the open outputs array, -1 when none
    bool in_string = false;
    bool escaped = false;
    std::string last_key;
    std::string current_string;
    bool pending_outputs = false;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const bool inside_at_start = outputs_depth >= 0;
        for (char c : lines[i]) {
            if (in_string) {
                if (escaped) {
                    escaped = false;
                } else if (c == '\\') {
                    escaped = true;
                } else if (c == '"') {
                    in_string = false;
                    last_key = current_string;
                } else {
                    current_string.push_back(c);
                }
                continue;
            }
            if (c == '"') {
                in_string = true;
                current_string.clear();
            } else if (c == ':') {
                pending_outputs = outputs_depth < 0 && last_key == "outputs";
            } else if (c == '[' || c == '{') {
                ++depth;
                if (pending_outputs && c == '[') {
                    outputs_depth = depth;
                }
                pending_outputs = false;
            } else if (c == ']' || c == '}') {
                if (outputs_depth == depth && c == ']') outputs_depth = -1;
                --depth;
            } else if (c == ',') {
                pending_outputs = false;
            }
        }
        if (inside_at_start) out.push_back(i + 1);
    }
    return out;
}

}  // namespace contribsum
