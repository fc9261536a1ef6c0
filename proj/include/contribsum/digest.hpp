#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace contribsum {

/// Lowercase hex SHA-1 of `data` (git object ids).
std::string sha1_hex(std::string_view data);

/// Lowercase hex SHA-256 of `data` (cache keys, template hashes, manifests).
std::string sha256_hex(std::string_view data);

/// Raw 20-byte SHA-1 digest.
std::string sha1_raw(std::string_view data);

std::string to_hex(std::string_view bytes);
std::string from_hex(std::string_view hex);

/// FNV-1a 64-bit; a cheap, stable, non-cryptographic hash used where
/// collision resistance is irrelevant (e.g. mock response selection).
std::uint64_t fnv1a64(std::string_view data) noexcept;

}  // namespace contribsum
