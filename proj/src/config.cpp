#include <contribsum/config.hpp>
#include <contribsum/error.hpp>
#include <contribsum/fsutil.hpp>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdlib>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace contribsum {

namespace {

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> list_value(std::string_view v) {
    std::vector<std::string> out;
    std::stringstream ss{std::string(v)};
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

bool bool_value(const std::string& key, std::string_view v) {
    std::string s(v);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
    if (s == "false" || s == "no" || s == "off" || s == "0") return false;
    throw ConfigError(key + ": expected true or false, got '" + std::string(v) + "'");
}

double number_value(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
}

std::size_t count_value(const std::string& key, const std::string& v) {
    double d = number_value(key, v);
    if (d < 0 || d != static_cast<double>(static_cast<std::size_t>(d))) {
        throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    }
    return static_cast<std::size_t>(d);
}

UtcTime time_value(const std::string& key, const std::string& v) {
    try {
        return parse_utc(v);
    } catch (const Error& e) {
        throw ConfigError(key + ": " + e.what());
    }
}

ProviderMode mode_value(const std::string& v) {
    if (v == "mock") return ProviderMode::mock;
    if (v == "replay") return ProviderMode::replay;
    if (v == "record") return ProviderMode::record;
    if (v == "live") return ProviderMode::live;
    throw ConfigError("run.provider: expected mock, replay, record or live, got '" + v + "'");
}

void read_tier(ModelTier& tier, const std::map<std::string, std::string>& section, const std::string& name) {
    for (const auto& [key, value] : section) {
        const auto full = name + "." + key;
        if (key == "model") tier.model_id = value;
        else if (key == "max_input_tokens") tier.max_input_tokens = count_value(full, value);
        else if (key == "cost_per_1k_input") tier.cost_per_1k_input = number_value(full, value);
        else if (key == "cost_per_1k_output") tier.cost_per_1k_output = number_value(full, value);
        else throw ConfigError("unknown key " + full);
    }
}

}  // namespace

IniDocument parse_ini(std::string_view text) {
    IniDocument doc;
    std::string section;
    std::stringstream in{std::string(text)};
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        auto line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(fmt::format("line {}: unterminated section header", line_no));
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) throw ConfigError(fmt::format("line {}: empty section name", line_no));
            doc[section];
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(fmt::format("line {}: expected key = value", line_no));
        if (section.empty()) throw ConfigError(fmt::format("line {}: key outside any section", line_no));
        auto key = trim(line.substr(0, eq));
        auto value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(fmt::format("line {}: empty key", line_no));
        if (!doc[section].emplace(key, value).second) {
            throw ConfigError(fmt::format("line {}: duplicate key {}.{}", line_no, section, key));
        }
    }
    return doc;
}

std::string_view to_string(ProviderMode mode) {
    switch (mode) {
        case ProviderMode::mock: return "mock";
        case ProviderMode::replay: return "replay";
        case ProviderMode::record: return "record";
        case ProviderMode::live: return "live";
    }
    return "mock";
}

RunConfig parse_config(std::string_view text, const fs::path& base_dir) {
    RunConfig c;
    c.base_dir = base_dir;
    for (const auto& [name, section] : parse_ini(text)) {
        if (name == "run") {
            for (const auto& [key, value] : section) {
                const auto full = "run." + key;
                if (key == "roster") c.roster = value;
                else if (key == "sprint_instructions") c.sprint_instructions = value;
                else if (key == "project_description") c.project_description = value;
                else if (key == "window_start") c.window_start = time_value(full, value);
                else if (key == "window_end") c.window_end = time_value(full, value);
                else if (key == "window_label") c.window_label = value;
                else if (key == "sprint_start") c.sprint_start = time_value(full, value);
                else if (key == "week") c.week = static_cast<int>(count_value(full, value));
                else if (key == "branch") c.branch = value;
                else if (key == "roles") c.roles = bool_value(full, value);
                else if (key == "coauthor_split") c.coauthor_split = bool_value(full, value);
                else if (key == "include_branches") c.include_branches = list_value(value);
                else if (key == "exclude") c.excludes = list_value(value);
                else if (key == "provider") c.provider = mode_value(value);
                else if (key == "replay_dir") c.replay_dir = value;
                else if (key == "output_dir") c.output_dir = value;
                else if (key == "state_dir") c.state_dir = value;
                else if (key == "team_concurrency") c.team_concurrency = count_value(full, value);
                else if (key == "agent_concurrency") c.agent_concurrency = count_value(full, value);
                else if (key == "requests_per_second") c.requests_per_second = number_value(full, value);
                else if (key == "clip_lines") c.clip_keep = count_value(full, value);
                else throw ConfigError("unknown key " + full);
            }
        } else if (name == "teams") {
            for (const auto& [team, path] : section) c.teams.push_back(TeamRepo{team, path});
        } else if (name == "analysis") {
            read_tier(c.analysis, section, name);
        } else if (name == "synthesis") {
            read_tier(c.synthesis, section, name);
        } else if (name == "live") {
            for (const auto& [key, value] : section) {
                if (key == "endpoint") c.endpoint = value;
                else if (key == "api_key") c.api_key = value;
                else throw ConfigError("unknown key live." + key);
            }
        } else {
            throw ConfigError("unknown section [" + name + "]");
        }
    }
    if (const char* key = std::getenv("LLM_API_KEY"); key && *key) c.api_key = key;
    return c;
}

RunConfig load_config(const fs::path& path) {
    auto text = try_read_file(path);
    if (!text) throw ConfigError("config file not found: " + path.string());
    return parse_config(*text, fs::absolute(path).parent_path());
}

fs::path resolve_path(const RunConfig& config, const fs::path& p) {
    if (p.empty() || p.is_absolute()) return p;
    return (config.base_dir / p).lexically_normal();
}

AnalysisWindow resolve_window(const RunConfig& c) {
    try {
        if (c.week) {
            if (!c.sprint_start) throw ConfigError("a week preset needs run.sprint_start");
            if (*c.week < 1) throw ConfigError("week must be >= 1");
            auto end = *c.sprint_start + std::chrono::days(7 * *c.week);
            return AnalysisWindow::make(*c.sprint_start, end, fmt::format("week-{}", *c.week));
        }
        if (!c.window_start || !c.window_end) {
            throw ConfigError("set run.window_start and run.window_end, or run.sprint_start with a week");
        }
        auto label = c.window_label;
        if (label.empty()) {
            label = format_utc(*c.window_start).substr(0, 10) + "_" + format_utc(*c.window_end).substr(0, 10);
        }
        return AnalysisWindow::make(*c.window_start, *c.window_end, label);
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
}

void validate(const RunConfig& c) {
    if (c.teams.empty()) throw ConfigError("no teams configured ([teams] section)");
    std::set<fs::path> seen;
    for (const auto& t : c.teams) {
        auto p = fs::weakly_canonical(resolve_path(c, t.path));
        if (!seen.insert(p).second) throw ConfigError("repository path used twice: " + p.string());
    }
    if (c.roster.empty()) throw ConfigError("run.roster is required");
    const auto roster = resolve_path(c, c.roster);
    std::error_code ec;
    if (!fs::is_regular_file(roster, ec)) throw ConfigError("roster file not found: " + roster.string());
    for (const auto* p : {&c.sprint_instructions, &c.project_description}) {
        if (!p->empty() && !fs::is_regular_file(resolve_path(c, *p), ec)) {
            throw ConfigError("file not found: " + resolve_path(c, *p).string());
        }
    }
    resolve_window(c);
    c.analysis.validate();
    c.synthesis.validate();
    if (c.provider == ProviderMode::live) {
        if (c.api_key.empty()) throw ConfigError("live mode needs an API key (set LLM_API_KEY)");
        if (c.endpoint.empty()) throw ConfigError("live mode needs live.endpoint");
    }
    if ((c.provider == ProviderMode::replay || c.provider == ProviderMode::record) && c.replay_dir.empty()) {
        throw ConfigError("replay and record modes need run.replay_dir");
    }
    if (c.provider == ProviderMode::replay && !fs::is_directory(resolve_path(c, c.replay_dir), ec)) {
        throw ConfigError("replay directory not found: " + resolve_path(c, c.replay_dir).string());
    }
    if (c.agent_concurrency == 0 || c.team_concurrency == 0) throw ConfigError("concurrency limits must be >= 1");
}

json to_json(const RunConfig& c) {
    auto tier = [](const ModelTier& t) {
        return json{{"model", t.model_id},
                    {"max_input_tokens", t.max_input_tokens},
                    {"cost_per_1k_input", t.cost_per_1k_input},
                    {"cost_per_1k_output", t.cost_per_1k_output}};
    };
    json teams = json::array();
    for (const auto& t : c.teams) teams.push_back({{"id", t.id}, {"path", t.path.string()}});
    auto opt_time = [](const std::optional<UtcTime>& t) { return t ? json(format_utc(*t)) : json(nullptr); };
    return {{"teams", teams},
            {"roster", c.roster.string()},
            {"sprint_instructions", c.sprint_instructions.string()},
            {"project_description", c.project_description.string()},
            {"window_start", opt_time(c.window_start)},
            {"window_end", opt_time(c.window_end)},
            {"window_label", c.window_label},
            {"sprint_start", opt_time(c.sprint_start)},
            {"week", c.week ? json(*c.week) : json(nullptr)},
            {"branch", c.branch ? json(*c.branch) : json(nullptr)},
            {"roles", c.roles},
            {"coauthor_split", c.coauthor_split},
            {"include_branches", c.include_branches},
            {"exclude", c.excludes},
            {"provider", to_string(c.provider)},
            {"replay_dir", c.replay_dir.string()},
            {"analysis", tier(c.analysis)},
            {"synthesis", tier(c.synthesis)},
            {"endpoint", c.endpoint},
            {"api_key", c.api_key.empty() ? "" : "<redacted>"},
            {"output_dir", c.output_dir.string()},
            {"state_dir", c.state_dir.string()},
            {"clip_lines", c.clip_keep}};
}

}  // namespace contribsum
