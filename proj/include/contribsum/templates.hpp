#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace contribsum {

/// A versioned prompt shipped under templates/ and compiled in.
struct PromptTemplate {
    std::string name;  // file name without ".txt", e.g. "functionality.v1"
    std::string text;
    std::string hash;  // sha256 of text, part of every cache key
    std::vector<std::string> placeholders;  // {{name}} occurrences, sorted, unique
};

/// Throws Error when no such template was shipped.
const PromptTemplate& prompt_template(std::string_view name);
std::vector<std::string> template_names();

/// Substitutes every {{name}}. Throws Error on a missing value or an
/// unknown key, so template and caller cannot drift apart silently.
std::string fill(const PromptTemplate& tmpl, const std::map<std::string, std::string>& values);

}  // namespace contribsum
