#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace contribsum {

/// Throws IoError.
std::string read_file(const std::filesystem::path& source);
std::optional<std::string> try_read_file(const std::filesystem::path& source);

/// Writes through a sibling temporary file and rename, creating parent
/// directories. Throws IoError.
void write_file_atomic(const std::filesystem::path& destination, std::string_view bytes);

}  // namespace contribsum
