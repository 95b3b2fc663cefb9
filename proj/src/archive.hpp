#pragma once

// Internal container readers used by unpack::extract. Each reader starts at
// a verified magic offset, reports how many input bytes the container
// consumed (for unknown-data gap accounting) and any per-member problems as
// warnings. A stream too corrupt to walk throws FormatError.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace firmscan::unpack::detail {

struct Member {
    std::string path;               // archive-internal path ('/' separators)
    std::vector<std::uint8_t> data;
    bool is_dir = false;
};

struct ReadResult {
    std::vector<Member> members;
    std::size_t consumed = 0;       // input bytes from offset
    std::vector<std::string> warnings;
    std::string suggested_name;     // gzip FNAME when present
};

// Per-stream decompression budget; a member beyond this is treated as
// corrupt rather than allowed to exhaust memory.
inline constexpr std::size_t kMaxDecompressedBytes = std::size_t{256} << 20;

ReadResult read_gzip(std::span<const std::uint8_t> data, std::size_t offset);
ReadResult read_xz(std::span<const std::uint8_t> data, std::size_t offset);
ReadResult read_lzma(std::span<const std::uint8_t> data, std::size_t offset);
ReadResult read_zip(std::span<const std::uint8_t> data, std::size_t offset);
ReadResult read_tar(std::span<const std::uint8_t> data, std::size_t offset);

} // namespace firmscan::unpack::detail
