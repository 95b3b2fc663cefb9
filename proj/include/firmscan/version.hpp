#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace firmscan::version {

/// A recognized version token.
///
/// numeric holds two or three components (major, minor[, patch]); a missing
/// patch compares as 0. letter is the optional single lowercase suffix
/// ("1.4.4a"), prerelease the optional dash-introduced identifier list
/// ("1.0.0-rc1"). raw is the exact matched text and reparses to an equal
/// Version.
struct Version {
    std::vector<int> numeric;
    std::optional<char> letter;
    std::vector<std::string> prerelease;
    std::string raw;

    int major() const { return numeric.empty() ? 0 : numeric[0]; }
    int minor() const { return numeric.size() > 1 ? numeric[1] : 0; }
    int patch() const { return numeric.size() > 2 ? numeric[2] : 0; }

    /// Canonical text form; parse_version(normalized()) reproduces *this.
    std::string normalized() const;

    bool operator==(const Version& other) const;
};

enum class Ordering { less, equal, greater };

enum class Op { eq, ge, le, tilde, caret };

struct VersionConstraint {
    Op op;
    Version bound;
};

/// Default byte budget when scanning a binary header for version strings.
inline constexpr std::size_t kDefaultRegionLimit = 1 << 20;

/// Default minimum printable-run length.
inline constexpr std::size_t kDefaultMinLength = 4;

/// Maximal runs of printable ASCII (0x20-0x7E) of length >= min_len within
/// the first region_limit bytes, as (byte offset, text) in offset order.
std::vector<std::pair<std::size_t, std::string>>
extract_strings(std::span<const std::uint8_t> file,
                std::size_t region_limit = kDefaultRegionLimit,
                std::size_t min_len = kDefaultMinLength);

/// First version token in s, or nullopt when the grammar finds none.
std::optional<Version> parse_version(std::string_view s);

/// Parses only when the whole string is a single version token. Used for
/// version text coming from CPE names and range bounds, where a partial
/// match would silently truncate ("1.4.100" must not become 1.4.10).
std::optional<Version> parse_version_exact(std::string_view s);

/// Total order: numeric components as integers, then letter
/// (absent < 'a' < 'b' ...), then prerelease (present < absent).
Ordering compare(const Version& a, const Version& b);

bool satisfies(const Version& v, const VersionConstraint& c);

/// A version string located inside a library binary.
struct VersionEvidence {
    Version version;
    std::string source_string;
    std::size_t byte_offset = 0;

    bool operator==(const VersionEvidence&) const = default;
};

/// Scans the header region for a version token, preferring the first string
/// that contains the library term (case-insensitive) over the first bare
/// version string.
std::optional<VersionEvidence>
extract_library_version(std::span<const std::uint8_t> file,
                        std::string_view term,
                        std::size_t region_limit = kDefaultRegionLimit,
                        std::size_t min_len = kDefaultMinLength);

} // namespace firmscan::version
