#include <contribsum/digest.hpp>
#include <contribsum/error.hpp>
#include <contribsum/fsutil.hpp>
#include <contribsum/providers.hpp>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using nlohmann::json;

namespace contribsum {

std::size_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

std::size_t estimate_tokens(const std::vector<Message>& messages) {
    std::size_t total = 0;
    for (const auto& m : messages) total += estimate_tokens(m.content);
    return total;
}

// ---------------------------------------------------------------------------
// Mock

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string line_value(std::string_view text, std::string_view prefix) {
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(pos, end - pos);
        if (line.substr(0, prefix.size()) == prefix) return std::string(line.substr(prefix.size()));
        pos = end + 1;
    }
    return {};
}

std::vector<std::string> lines_with_prefix(std::string_view text, std::string_view prefix) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(pos, end - pos);
        if (line.substr(0, prefix.size()) == prefix) out.emplace_back(line.substr(prefix.size()));
        pos = end + 1;
    }
    return out;
}

std::string fenced_block(std::string_view text) {
    auto open = text.find("<<<\n");
    auto close = text.rfind("\n>>>");
    if (open == std::string_view::npos || close == std::string_view::npos || close < open + 3) return {};
    return std::string(text.substr(open + 4, close - open - 4));
}

std::vector<std::string> split(std::string_view s, std::string_view sep) {
    std::vector<std::string> out;
    while (true) {
        auto at = s.find(sep);
        out.emplace_back(s.substr(0, at));
        if (at == std::string_view::npos) break;
        s.remove_prefix(at + sep.size());
    }
    return out;
}

std::string join_phrases(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += i + 1 == items.size() ? " and " : ", ";
        out += items[i];
    }
    return out;
}

struct Feature {
    std::vector<std::string_view> needles;
    std::string_view phrase;
    std::string_view challenge;
    std::string_view area;
};

const std::vector<Feature>& features() {
    static const std::vector<Feature> all{
        {{"password", "hashlib", "hmac", "authenticat", "recovery", "token"},
         "handles authentication and password security",
         "getting password hashing, token checks and recovery flows right",
         "security"},
        {{"flask", "blueprint", ".route("}, "exposes HTTP routes with Flask",
         "structuring routes, blueprints and their error handling", "backend"},
        {{"mongo"}, "reads and writes MongoDB collections", "keeping queries and document shapes consistent", "data"},
        {{"redis"}, "caches results in Redis", "invalidating cached results correctly", "data"},
        {{"streamlit"}, "builds an interactive Streamlit page", "managing page state across reruns", "frontend"},
        {{"pandas", "dataframe"}, "organizes tabular data with pandas", "shaping data frames for the views that use them",
         "data"},
        {{"to_excel", "excel"}, "generates Excel reports", "producing well-formed spreadsheet output", "data"},
        {{"<html", "<body", "<p>", "<button", "<div"}, "defines HTML page markup", "keeping markup valid and accessible",
         "frontend"},
        {{"def test_", "unittest", "pytest"}, "tests application behavior", "isolating the code under test",
         "testing"},
    };
    return all;
}

std::vector<const Feature*> detect(std::string_view text) {
    const auto low = lower(text);
    std::vector<const Feature*> out;
    for (const auto& f : features()) {
        for (auto n : f.needles) {
            if (low.find(n) != std::string::npos) {
                out.push_back(&f);
                break;
            }
        }
    }
    return out;
}

std::vector<std::string> path_areas(std::string_view path) {
    const auto p = lower(path);
    std::vector<std::string> out;
    auto has = [&](std::string_view s) { return p.find(s) != std::string::npos; };
    if (has("auth") || has("login") || has("password") || has("secret") || has("rec_")) out.push_back("security");
    if (has("pages/") || has(".html") || has(".css") || has(".js")) out.push_back("frontend");
    if (has("route") || has("api") || p == "app.py" || has("server")) out.push_back("backend");
    if (has("mongo") || has("db") || has("dashboard") || has("data")) out.push_back("data");
    if (has("test")) out.push_back("testing");
    if (has(".md") || has("readme") || has("docs/")) out.push_back("documentation");
    return out;
}

std::string area_phrase(std::string_view area) {
    if (area == "security") return "security and authentication";
    if (area == "backend") return "the backend";
    if (area == "frontend") return "the frontend";
    if (area == "data") return "data handling";
    if (area == "testing") return "testing";
    if (area == "documentation") return "documentation";
    return std::string(area);
}

std::vector<std::string> def_names(std::string_view code) {
    static const std::regex re(R"(^\s*(?:async\s+)?def\s+([A-Za-z_]\w*))");
    std::vector<std::string> out;
    std::istringstream in{std::string(code)};
    std::string line;
    std::smatch m;
    while (std::getline(in, line)) {
        if (std::regex_search(line, m, re)) out.push_back(m[1].str());
    }
    return out;
}

std::string first_sentence(std::string_view text) {
    auto end = text.find(". ");
    auto s = std::string(end == std::string_view::npos ? text : text.substr(0, end + 1));
    if (!s.empty() && s.back() != '.') s += '.';
    return s;
}

std::string reply_functionality(std::string_view prompt) {
    const auto path = line_value(prompt, "File: ");
    const auto metrics = line_value(prompt, "Metrics: ");
    const auto content = fenced_block(prompt);
    if (content.empty()) {
        return "FUNCTIONALITY: " + path + " is empty.\nDIFFICULTY: None.\n";
    }
    auto found = detect(content);
    std::vector<std::string> phrases;
    std::vector<std::string> challenges;
    for (const auto* f : found) {
        phrases.emplace_back(f->phrase);
        challenges.emplace_back(f->challenge);
    }
    std::string functionality = "The file " + path;
    functionality += phrases.empty() ? " holds supporting project code" : " " + join_phrases(phrases);
    functionality += '.';
    auto defs = def_names(content);
    if (!defs.empty()) {
        if (defs.size() > 6) defs.resize(6);
        functionality += " It defines " + join_phrases(defs) + ".";
    }
    int complexity = 0;
    if (auto at = metrics.find("complexity "); at != std::string::npos) complexity = std::atoi(metrics.c_str() + at + 11);
    std::string level = complexity >= 11 ? "High" : complexity >= 5 ? "Moderate" : "Low";
    std::string difficulty = level + ".";
    if (!challenges.empty()) difficulty += " The main challenge is " + challenges.front() + ".";
    if (challenges.size() > 1) difficulty += " It also requires " + challenges[1] + ".";
    return "FUNCTIONALITY: " + functionality + "\nDIFFICULTY: " + difficulty + "\n";
}

std::string html_additions(std::string_view owned) {
    static const std::vector<std::pair<std::string_view, std::string_view>> tags{
        {"<p", "a paragraph"}, {"<button", "a button"}, {"<form", "a form"},  {"<table", "a table"},
        {"<img", "an image"},  {"<a ", "a link"},       {"<h1", "a heading"}, {"<input", "an input field"},
    };
    std::vector<std::string> found;
    const auto low = lower(owned);
    for (auto [tag, phrase] : tags) {
        auto at = low.find(tag);
        if (at == std::string::npos) continue;
        auto next = at + tag.size() < low.size() ? low[at + tag.size()] : ' ';
        if (next == '>' || next == ' ' || tag.back() == ' ') found.emplace_back(phrase);
    }
    return join_phrases(found);
}

bool only_comments(std::string_view owned) {
    std::istringstream in{std::string(owned)};
    std::string line;
    bool any = false;
    while (std::getline(in, line)) {
        auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        any = true;
        auto rest = std::string_view(line).substr(first);
        if (rest.front() != '#' && rest.substr(0, 2) != "//" && rest.substr(0, 4) != "<!--") return false;
    }
    return any;
}

std::string reply_contribution(std::string_view prompt) {
    const auto student = line_value(prompt, "Student: ");
    const auto path = line_value(prompt, "File: ");
    const auto owned = line_value(prompt, "Lines owned in the snapshot: ");
    const auto solo = line_value(prompt, "Functions written only by this student (name:complexity): ");
    const auto lines = fenced_block(prompt);
    std::string d;
    if (only_comments(lines)) {
        d = student + " added comment lines to " + path + " describing the existing code.";
    } else if (auto html = html_additions(lines); !html.empty() && std::atoi(owned.c_str()) < 20) {
        d = student + " made a specific contribution to the frontend, adding " + html + " to " + path + ".";
    } else {
        d = student + " wrote " + owned + " of the current lines in " + path;
        std::vector<std::string> phrases;
        for (const auto* f : detect(lines)) phrases.emplace_back(f->phrase);
        if (!phrases.empty()) {
            // Feature phrases read as "that handles ...".
            d += ", code that " + join_phrases(phrases);
        }
        d += ".";
        auto defs = def_names(lines);
        if (!defs.empty()) {
            if (defs.size() > 6) defs.resize(6);
            d += " This includes " + join_phrases(defs) + ".";
        }
    }
    if (!solo.empty() && solo != "none") {
        std::vector<std::string> items;
        for (auto& item : split(solo, "; ")) {
            auto colon = item.rfind(':');
            if (colon == std::string::npos) continue;
            items.push_back(item.substr(0, colon) + " (complexity " + item.substr(colon + 1) + ")");
        }
        if (!items.empty()) d += " Written alone: " + join_phrases(items) + ".";
    }
    return "DESCRIPTION: " + d + "\n";
}

struct AreaTally {
    std::map<std::string, int> score;

    void add(const std::vector<std::string>& areas, int weight) {
        for (const auto& a : areas) score[a] += weight;
    }
    std::vector<std::string> ranked() const {
        static const std::vector<std::string> order{"security", "backend", "frontend", "data", "testing", "documentation"};
        std::vector<std::string> out;
        for (const auto& a : order) {
            if (score.count(a)) out.push_back(a);
        }
        std::stable_sort(out.begin(), out.end(), [&](const auto& x, const auto& y) { return score.at(x) > score.at(y); });
        return out;
    }
};

std::vector<std::string> text_areas(std::string_view text) {
    std::vector<std::string> out;
    for (const auto* f : detect(text)) {
        if (std::find(out.begin(), out.end(), f->area) == out.end()) out.emplace_back(f->area);
    }
    return out;
}

std::string reply_student(std::string_view prompt) {
    const auto student = line_value(prompt, "Student: ");
    const auto rows = lines_with_prefix(prompt, "CONTRIBUTION ");
    AreaTally tally;
    std::size_t total_owned = 0;
    std::string bullets;
    for (const auto& row : rows) {
        auto cells = split(row, " | ");
        const auto& path = cells[0];
        const std::string description = cells.size() > 2 ? cells[2] : "";
        std::size_t owned = cells.size() > 1 ? std::strtoul(cells[1].c_str(), nullptr, 10) : 0;
        total_owned += owned;
        const int weight = 1 + static_cast<int>(std::min<std::size_t>(owned, 200) / 20);
        tally.add(path_areas(path), weight);
        tally.add(text_areas(description), weight);
        std::string sentence = first_sentence(description);
        bullets += "- " + path + ": " + (sentence.empty() ? "Contributed to this file." : sentence) + "\n";
    }
    auto areas = tally.ranked();
    std::string summary;
    if (areas.empty()) {
        summary = student + " made contributions to " + std::to_string(rows.size()) + " file(s) during the window.";
    } else {
        summary = student + " focused on " + area_phrase(areas[0]);
        std::vector<std::string> rest;
        for (std::size_t i = 1; i < areas.size() && i < 3; ++i) rest.push_back(area_phrase(areas[i]));
        if (!rest.empty()) summary += ", also working on " + join_phrases(rest);
        summary += fmt::format(", across {} file(s).", rows.size());
    }
    std::string out = "SUMMARY: " + summary + "\nCONTRIBUTIONS:\n" + bullets;
    if (prompt.find("ROLE: <") != std::string_view::npos) {
        static const std::map<std::string, std::string> role_for{
            {"security", "Security Engineer"}, {"backend", "Backend Engineer"}, {"frontend", "Frontend Engineer"},
            {"data", "Data Engineer"},         {"testing", "DevOps Engineer"},  {"documentation", "Documenter"}};
        std::string role = areas.empty() ? "Documenter" : role_for.at(areas[0]);
        if (areas.size() >= 4 && total_owned >= 300) role = "Technical Leader";
        out += "ROLE: " + std::string(total_owned >= 150 ? "Senior" : "Junior") + " " + role + "\n";
    }
    return out;
}

std::string reply_team(std::string_view prompt) {
    const auto window = line_value(prompt, "Window: ");
    const auto rows = lines_with_prefix(prompt, "STUDENT ");
    std::set<std::string> students;
    std::set<std::string> files;
    AreaTally tally;
    for (const auto& row : rows) {
        auto cells = split(row, " | ");
        students.insert(cells[0]);
        if (cells.size() > 1) {
            files.insert(cells[1]);
            tally.add(path_areas(cells[1]), 1);
        }
        if (cells.size() > 2) tally.add(text_areas(cells[2]), 1);
    }
    auto areas = tally.ranked();
    std::vector<std::string> phrases;
    for (const auto& a : areas) phrases.push_back(area_phrase(a));
    std::string narrative = fmt::format("During {}, {} student(s) contributed to {} file(s)", window, students.size(),
                                        files.size());
    narrative += phrases.empty() ? "." : ", advancing " + join_phrases(phrases) + ".";
    static const std::map<std::string, std::string> bullet_for{
        {"security", "Implemented authentication and password security features."},
        {"backend", "Extended the backend routes and services."},
        {"frontend", "Built and refined user-facing pages."},
        {"data", "Improved how project data is stored and processed."},
        {"testing", "Added automated tests for application behavior."},
        {"documentation", "Improved the project documentation."}};
    std::string out = "NARRATIVE: " + narrative + "\nPROGRESS:\n";
    for (const auto& a : areas) out += "- " + bullet_for.at(a) + "\n";
    if (areas.empty()) out += "- Continued work on " + std::to_string(files.size()) + " project file(s).\n";
    return out;
}

}  // namespace

std::string mock_reply(const std::vector<Message>& messages) {
    auto first_user = std::find_if(messages.begin(), messages.end(), [](const auto& m) { return m.role == "user"; });
    if (first_user == messages.end()) return "OK\n";
    const std::string_view prompt = first_user->content;
    const auto task = line_value(prompt, "TASK: ");
    if (task == "functionality") return reply_functionality(prompt);
    if (task == "contribution") return reply_contribution(prompt);
    if (task == "student_summary") return reply_student(prompt);
    if (task == "team_summary") return reply_team(prompt);
    return "OK\n";
}

MockProvider::MockProvider(std::vector<ModelTier> tiers) {
    for (const auto& t : tiers) max_input_[t.model_id] = t.max_input_tokens;
}

Completion MockProvider::send(const std::vector<Message>& messages, const std::string& model_id) {
    const auto tokens = estimate_tokens(messages);
    if (auto it = max_input_.find(model_id); it != max_input_.end()) {
        const double fraction = static_cast<double>(tokens) / static_cast<double>(it->second);
        {
            std::lock_guard lock(mutex_);
            peak_ = std::max(peak_, fraction);
        }
        if (tokens * 10 > it->second * 8) {
            throw PreconditionViolation(fmt::format("request of {} tokens exceeds 80% of {}'s max_input_tokens ({})",
                                                    tokens, model_id, it->second));
        }
    }
    ++calls_;
    Completion c;
    c.text = mock_reply(messages);
    c.input_tokens = tokens;
    c.output_tokens = estimate_tokens(c.text);
    c.billable = false;
    return c;
}

double MockProvider::peak_budget_fraction() const {
    std::lock_guard lock(mutex_);
    return peak_;
}

// ---------------------------------------------------------------------------
// Replay

json completion_request_json(const std::vector<Message>& messages, const std::string& model_id) {
    json msgs = json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    return {{"model", model_id}, {"messages", std::move(msgs)}};
}

std::string request_hash(const std::vector<Message>& messages, const std::string& model_id) {
    return sha256_hex(completion_request_json(messages, model_id).dump());
}

ReplayProvider::ReplayProvider(fs::path dir, Mode mode, std::shared_ptr<Provider> inner)
    : dir_(std::move(dir)), mode_(mode), inner_(std::move(inner)) {
    if (mode_ == Mode::record && !inner_) throw ConfigError("record mode needs an inner provider");
}

Completion ReplayProvider::send(const std::vector<Message>& messages, const std::string& model_id) {
    const auto key = request_hash(messages, model_id);
    const auto path = dir_ / (key + ".json");
    if (auto text = try_read_file(path)) {
        try {
            auto doc = json::parse(*text);
            const auto& r = doc.at("response");
            Completion c;
            c.text = r.at("text").get<std::string>();
            c.input_tokens = r.at("input_tokens").get<std::size_t>();
            c.output_tokens = r.at("output_tokens").get<std::size_t>();
            return c;
        } catch (const json::exception& e) {
            throw ProviderError("unreadable recording " + path.string() + ": " + e.what(), 1);
        }
    }
    if (mode_ == Mode::replay) throw ProviderError("no recording for request " + key + " in " + dir_.string(), 1);
    auto c = inner_->send(messages, model_id);
    auto doc = completion_request_json(messages, model_id);
    doc["response"] = {{"text", c.text}, {"input_tokens", c.input_tokens}, {"output_tokens", c.output_tokens}};
    write_file_atomic(path, doc.dump(2) + "\n");
    return c;
}

// ---------------------------------------------------------------------------
// HTTP

namespace {

struct Url {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

Url split_url(const std::string& url) {
    auto scheme = url.find("://");
    if (scheme == std::string::npos) throw ConfigError("endpoint must be an absolute URL: " + url);
    auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace

Completion parse_completion_response(const std::string& body) {
    try {
        auto doc = json::parse(body);
        Completion c;
        if (doc.contains("choices")) {
            c.text = doc.at("choices").at(0).at("message").at("content").get<std::string>();
            const auto& usage = doc.at("usage");
            c.input_tokens = usage.at("prompt_tokens").get<std::size_t>();
            c.output_tokens = usage.at("completion_tokens").get<std::size_t>();
        } else {
            c.text = doc.at("text").get<std::string>();
            c.input_tokens = doc.at("input_tokens").get<std::size_t>();
            c.output_tokens = doc.at("output_tokens").get<std::size_t>();
        }
        return c;
    } catch (const json::exception& e) {
        throw ProviderError(std::string("unexpected response body: ") + e.what(), 1);
    }
}

HttpProvider::HttpProvider(HttpOptions options) : options_(std::move(options)) {
    if (options_.api_key.empty()) throw ConfigError("live provider needs an API key (LLM_API_KEY)");
    split_url(options_.endpoint);
}

Completion HttpProvider::send(const std::vector<Message>& messages, const std::string& model_id) {
    const auto url = split_url(options_.endpoint);
    const auto body = completion_request_json(messages, model_id).dump();
    httplib::Client client(url.origin);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(options_.timeout).count());
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(options_.timeout).count());
    httplib::Headers headers{{"Authorization", "Bearer " + options_.api_key}};
    auto backoff = options_.initial_backoff;
    std::string last_error;
    for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
        auto res = client.Post(url.path, headers, body, "application/json");
        if (res && res->status >= 200 && res->status < 300) {
            auto c = parse_completion_response(res->body);
            if (options_.log_dir) {
                auto doc = completion_request_json(messages, model_id);
                doc["response"] = {{"text", c.text}, {"input_tokens", c.input_tokens}, {"output_tokens", c.output_tokens}};
                write_file_atomic(*options_.log_dir / (request_hash(messages, model_id) + ".json"), doc.dump(2) + "\n");
            }
            return c;
        }
        const bool retryable = !res || res->status == 429 || res->status >= 500;
        last_error = res ? fmt::format("HTTP {}", res->status) : "connection failed: " + httplib::to_string(res.error());
        if (!retryable) throw ProviderError(last_error, attempt);
        if (attempt < options_.max_attempts) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
    throw ProviderError(last_error, options_.max_attempts);
}

bool HttpProvider::reachable(std::string* detail) const {
    const auto url = split_url(options_.endpoint);
    httplib::Client client(url.origin);
    client.set_connection_timeout(10);
    client.set_read_timeout(10);
    auto res = client.Head(url.path);
    if (detail) *detail = res ? fmt::format("HTTP {}", res->status) : httplib::to_string(res.error());
    return static_cast<bool>(res);
}

}  // namespace contribsum
