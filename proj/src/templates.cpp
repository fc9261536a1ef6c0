#include <contribsum/digest.hpp>
#include <contribsum/embedded.hpp>
#include <contribsum/error.hpp>
#include <contribsum/templates.hpp>

#include <algorithm>
#include <regex>
#include <set>

namespace contribsum {

namespace {

const std::regex& placeholder_re() {
    static const std::regex re(R"(\{\{([a-z_]+)\}\})");
    return re;
}

std::vector<PromptTemplate> load_all() {
    std::vector<PromptTemplate> out;
    for (const auto& f : detail::embedded_templates()) {
        PromptTemplate t;
        t.name = std::string(f.name.substr(0, f.name.size() - 4));
        t.text = std::string(f.content);
        t.hash = sha256_hex(t.text);
        std::set<std::string> names;
        for (std::sregex_iterator it(t.text.begin(), t.text.end(), placeholder_re()), end; it != end; ++it) {
            names.insert((*it)[1].str());
        }
        t.placeholders.assign(names.begin(), names.end());
        out.push_back(std::move(t));
    }
    return out;
}

const std::vector<PromptTemplate>& all() {
    static const std::vector<PromptTemplate> templates = load_all();
    return templates;
}

}  // namespace

const PromptTemplate& prompt_template(std::string_view name) {
    for (const auto& t : all()) {
        if (t.name == name) return t;
    }
    throw Error("prompt template not found: " + std::string(name));
}

std::vector<std::string> template_names() {
    std::vector<std::string> names;
    for (const auto& t : all()) names.push_back(t.name);
    return names;
}

std::string fill(const PromptTemplate& tmpl, const std::map<std::string, std::string>& values) {
    for (const auto& [key, value] : values) {
        if (!std::binary_search(tmpl.placeholders.begin(), tmpl.placeholders.end(), key)) {
            throw Error("template " + tmpl.name + " has no placeholder {{" + key + "}}");
        }
    }
    std::string out;
    std::size_t last = 0;
    for (std::sregex_iterator it(tmpl.text.begin(), tmpl.text.end(), placeholder_re()), end; it != end; ++it) {
        const auto& m = *it;
        out.append(tmpl.text, last, static_cast<std::size_t>(m.position()) - last);
        auto found = values.find(m[1].str());
        if (found == values.end()) throw Error("template " + tmpl.name + " needs a value for {{" + m[1].str() + "}}");
        out += found->second;
        last = static_cast<std::size_t>(m.position() + m.length());
    }
    out.append(tmpl.text, last);
    return out;
}

}  // namespace contribsum
