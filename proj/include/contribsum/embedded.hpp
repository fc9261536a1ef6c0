#pragma once

#include <string_view>
#include <vector>

namespace contribsum::detail {

struct EmbeddedFile {
    std::string_view name;
    std::string_view content;
};

/// templates/*.txt, sorted by name.
const std::vector<EmbeddedFile>& embedded_templates();
/// fixtures/*.script, sorted by name.
const std::vector<EmbeddedFile>& embedded_fixtures();

}  // namespace contribsum::detail
