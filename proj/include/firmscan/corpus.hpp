#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "firmscan/dates.hpp"

namespace firmscan::corpus {

/// One firmware image plus its manifest metadata.
struct FirmwareRecord {
    std::string firmware_name;
    std::string manufacturer;
    std::string device_type;
    std::string product;
    std::string version;
    dates::Date publish_time;
    std::string url;
    std::string checksum;       // 32 lowercase hex, MD5 of the image bytes
    std::optional<std::filesystem::path> local_path;

    bool operator==(const FirmwareRecord&) const = default;
};

enum class FilterReason {
    ok,
    suffix_too_long,
    suffix_numeric,
    duplicate_checksum,
    missing_metadata,
};

std::string_view to_string(FilterReason r);
std::optional<FilterReason> filter_reason_from_string(std::string_view s);

struct CorpusFilterDecision {
    FirmwareRecord record;
    bool kept = false;
    FilterReason reason = FilterReason::ok;

    bool operator==(const CorpusFilterDecision&) const = default;
};

struct ManifestLoadResult {
    std::vector<FirmwareRecord> records;
    std::vector<CorpusFilterDecision> dropped;  // reason missing_metadata
};

/// Reads a UTF-8 JSON array of record objects. Entries missing any
/// mandatory field (or carrying an unparseable checksum/date) are dropped
/// and reported as decisions rather than silently lost.
ManifestLoadResult load_manifest(const std::filesystem::path& path);

/// Keeps the first record per checksum, preserving input order.
std::vector<FirmwareRecord> dedup(const std::vector<FirmwareRecord>& records);

/// As dedup, additionally reporting one duplicate_checksum decision per
/// dropped record.
std::vector<FirmwareRecord> dedup(const std::vector<FirmwareRecord>& records,
                                  std::vector<CorpusFilterDecision>& decisions);

/// Applies the two filename-suffix heuristics: reject when the suffix (text
/// after the final '.') is longer than 5 characters or contains two or more
/// digit characters. A URL with no filename component is rejected as
/// missing_metadata since no suffix is derivable.
std::vector<CorpusFilterDecision>
filter_unqualified(const std::vector<FirmwareRecord>& records);

/// Downloads (http/https) or copies (file) the image into
/// cache_dir/<checksum>.bin, verifying the MD5 and writing via a temp file
/// and atomic rename so a partial transfer is never visible under the final
/// key. A cache hit skips the transfer. Returns the record with local_path
/// set.
FirmwareRecord fetch(const FirmwareRecord& record,
                     const std::filesystem::path& cache_dir);

} // namespace firmscan::corpus
