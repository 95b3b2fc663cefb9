#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

namespace firmscan::md5 {

/// MD5 of a byte buffer as 32 lowercase hex digits.
std::string hex_digest(std::span<const std::uint8_t> data);

/// MD5 of a file's contents, streamed. Throws IoError if unreadable.
std::string hex_digest_file(const std::filesystem::path& path);

/// True iff s is exactly 32 lowercase hex characters.
bool is_checksum(std::string_view s);

} // namespace firmscan::md5
