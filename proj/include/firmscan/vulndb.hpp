#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "firmscan/dates.hpp"
#include "firmscan/libid.hpp"
#include "firmscan/version.hpp"

namespace firmscan::vulndb {

/// Parsed CPE name, accepted in 2.2 URI ("cpe:/a:samba:samba:4.0") and
/// 2.3 formatted-string ("cpe:2.3:a:busybox:busybox:1.21.1:*:...") forms.
struct CpeName {
    char part = 'a';            // a = application, o = OS, h = hardware
    std::string vendor;
    std::string product;
    std::string version_text;   // empty when wildcard
    bool wildcard_version = false;
    std::string raw;

    bool operator==(const CpeName&) const = default;
};

CpeName parse_cpe(std::string_view s);

/// One applicability statement of a CVE: a CPE plus optional version range
/// bounds, meaningful only when the CPE version is a wildcard.
struct Applicability {
    CpeName cpe;
    std::optional<version::Version> start_incl;
    std::optional<version::Version> start_excl;
    std::optional<version::Version> end_incl;
    std::optional<version::Version> end_excl;

    bool has_bounds() const {
        return start_incl || start_excl || end_incl || end_excl;
    }
    /// True when the statement constrains no version at all (the CVE rows
    /// the feed carries without version information).
    bool unversioned() const { return cpe.wildcard_version && !has_bounds(); }

    bool operator==(const Applicability&) const = default;
};

struct CveEntry {
    std::string cve_id;
    dates::Date published;
    double cvss_base = 0.0;
    std::vector<std::string> cwe_ids;
    std::vector<Applicability> applicability;

    bool operator==(const CveEntry&) const = default;
};

/// Indexed CVE collection loaded from the JSON feed.
class VulnDatabase {
public:
    static VulnDatabase load(const std::filesystem::path& path);
    static VulnDatabase from_json_text(std::string_view text);

    const std::vector<CveEntry>& entries() const { return entries_; }
    std::size_t malformed_count() const { return malformed_count_; }

    /// Indices of entries with any applicability whose product equals the
    /// (lowercased) name.
    std::vector<std::size_t> candidates(std::string_view product) const;

private:
    std::vector<CveEntry> entries_;
    std::unordered_map<std::string, std::vector<std::size_t>> by_product_;
    std::size_t malformed_count_ = 0;
};

struct MatchOptions {
    /// Match applicability statements that carry no version information at
    /// all. Off by default; such findings are tagged low_confidence.
    bool include_unversioned = false;
};

/// The output tuple joining firmware, library and CVE.
struct Finding {
    std::string firmware_checksum;
    std::string library;
    version::Version version;
    std::string cve_id;
    double cvss_base = 0.0;
    std::vector<std::string> cwe_ids;
    dates::Date cve_published;
    bool low_confidence = false;

    bool operator==(const Finding&) const = default;
};

/// CVEs applicable to (library, version): product name compared
/// case-insensitively against the CPE product (vendor ignored), version
/// either equal to a concrete CPE version or inside the range bounds.
/// Sorted by cve_id, one finding per CVE. firmware_checksum is left empty.
std::vector<Finding> match(std::string_view library,
                           const version::Version& v,
                           const VulnDatabase& db,
                           const MatchOptions& opts = {});

struct VersionedOccurrence {
    libid::LibraryOccurrence occurrence;
    std::optional<version::VersionEvidence> evidence;

    bool operator==(const VersionedOccurrence&) const = default;
};

struct ScanResult {
    std::vector<Finding> findings;
    std::vector<libid::LibraryOccurrence> unversioned;
};

/// Union of match() over all versioned occurrences, tagged with the
/// firmware checksum. Occurrences without version evidence are reported in
/// the unversioned list, never silently dropped.
ScanResult scan_firmware(const std::vector<VersionedOccurrence>& occurrences,
                         const VulnDatabase& db,
                         std::string_view firmware_checksum,
                         const MatchOptions& opts = {});

} // namespace firmscan::vulndb
