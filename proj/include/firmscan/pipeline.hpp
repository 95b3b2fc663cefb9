#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "firmscan/analytics.hpp"
#include "firmscan/corpus.hpp"
#include "firmscan/libid.hpp"
#include "firmscan/unpack.hpp"
#include "firmscan/vulndb.hpp"

namespace firmscan::pipeline {

enum class OutputFormat { json, csv };

struct PipelineConfig {
    std::filesystem::path manifest_path;
    std::filesystem::path cache_dir;
    std::filesystem::path dict_path;
    std::filesystem::path feed_path;
    std::filesystem::path releases_path;
    std::optional<std::filesystem::path> exposure_path;
    int max_depth = unpack::kDefaultMaxDepth;
    std::size_t region_limit = version::kDefaultRegionLimit;
    std::optional<std::filesystem::path> output_path;
    OutputFormat output_format = OutputFormat::json;
    int jobs = 0;                    // 0 = available parallelism
    bool match_unversioned = false;
};

/// Everything the scan learned about one firmware image.
struct FirmwareReport {
    corpus::FirmwareRecord record;
    unpack::EncryptionVerdict encryption;
    unpack::FirmwareTraits traits;
    std::vector<vulndb::VersionedOccurrence> occurrences;
    std::vector<vulndb::Finding> findings;
    std::vector<libid::LibraryOccurrence> unversioned;

    bool operator==(const FirmwareReport&) const = default;
};

/// A firmware whose processing failed; isolated so the corpus scan
/// continues.
struct QuarantineEntry {
    corpus::FirmwareRecord record;
    std::string stage;   // "fetch", "extract", ...
    std::string error;

    bool operator==(const QuarantineEntry&) const = default;
};

struct OutdatedRecord {
    std::string firmware_checksum;
    analytics::OutdatedLabel label;

    bool operator==(const OutdatedRecord&) const = default;
};

struct NotIndexedRecord {
    std::string firmware_checksum;
    std::string library;
    std::string version;

    bool operator==(const NotIndexedRecord&) const = default;
};

struct Totals {
    std::size_t firmware_count = 0;
    std::size_t library_count = 0;        // distinct canonical libraries
    std::size_t finding_count = 0;
    std::size_t distinct_cve_count = 0;

    bool operator==(const Totals&) const = default;
};

struct Report {
    std::vector<FirmwareReport> firmware;          // manifest order
    std::vector<QuarantineEntry> quarantined;
    std::vector<corpus::CorpusFilterDecision> rejected;
    std::vector<OutdatedRecord> outdated;
    std::vector<NotIndexedRecord> not_indexed;
    std::vector<analytics::UpdateStats> update_stats;
    std::vector<analytics::PersistenceRecord> persistence;
    analytics::SeverityDistributions severity;
    std::map<std::string, long long> exposure;     // "lib@version" -> count
    std::vector<std::string> exposure_unavailable; // pairs the provider had no data for
    Totals totals;

    bool operator==(const Report&) const = default;
};

/// Runs corpus -> unpack -> libid -> version -> vulndb -> analytics over
/// every manifest record. Per-image failures are quarantined with a
/// diagnostic; they never abort the run. Throws ConfigError before any work
/// when the configuration is unusable.
Report run_pipeline(const PipelineConfig& config);

std::string report_to_json_text(const Report& report);
Report report_from_json_text(const std::string& text);

/// Recomputes the corpus-level sections (outdated, update stats,
/// persistence, severity, exposure, totals) from the per-firmware sections.
/// run_pipeline uses this; `firmscan analyze` re-runs it over a saved
/// report with a different release index or exposure map.
void recompute_corpus_analytics(Report& report,
                                const analytics::ReleaseIndex& releases,
                                const analytics::ExposureProvider* provider);

/// json: one UTF-8 document, keys sorted, byte-stable across runs.
/// csv: the findings table (firmware_checksum, library, version, cve_id,
/// cvss, delay_days).
void emit_report(const Report& report,
                 const std::filesystem::path& output_path,
                 OutputFormat format);

} // namespace firmscan::pipeline
