#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "firmscan/corpus.hpp"
#include "firmscan/dates.hpp"
#include "firmscan/version.hpp"
#include "firmscan/vulndb.hpp"

namespace firmscan::analytics {

/// Per-library ordered release lists, loaded from a JSON map
/// canonical -> [version strings ascending].
class ReleaseIndex {
public:
    static ReleaseIndex load(const std::filesystem::path& path);
    static ReleaseIndex from_json_text(std::string_view text);

    bool contains(std::string_view library) const;
    /// Position of an exact (compare == equal) release, newest = size-1.
    std::optional<std::size_t> index_of(std::string_view library,
                                        const version::Version& v) const;
    const version::Version* newest(std::string_view library) const;
    std::size_t release_count(std::string_view library) const;

private:
    std::map<std::string, std::vector<version::Version>, std::less<>> by_library_;
};

struct OutdatedLabel {
    std::string library;
    version::Version found;
    version::Version newest;
    bool is_outdated = false;
    std::optional<int> interval_distance;  // index(newest) - index(found)

    bool operator==(const OutdatedLabel&) const = default;
};

/// Labels a found version against the library's release list. Throws
/// NotIndexedError when the library is absent so callers can report those
/// separately.
OutdatedLabel label_outdated(std::string_view library,
                             const version::Version& found,
                             const ReleaseIndex& index);

struct SeriesKey {
    std::string manufacturer;        // lowercase
    std::string normalized_product;  // lowercase, trailing revision token stripped

    auto operator<=>(const SeriesKey&) const = default;
};

SeriesKey series_key(const corpus::FirmwareRecord& record);

/// Groups records into device series; within a series records are sorted by
/// publish_time (stable, so manifest order breaks ties).
std::map<SeriesKey, std::vector<corpus::FirmwareRecord>>
group_series(const std::vector<corpus::FirmwareRecord>& records);

/// One (firmware, version) sighting of a library, used as update_history
/// input. Entries must be in the series' time order.
struct LibraryObservation {
    std::string firmware_checksum;
    dates::Date publish_time;
    std::string library;
    version::Version version;
};

struct UpdateStats {
    SeriesKey series;
    std::string library;
    int update_count = 0;
    std::vector<long> update_delays;   // days, one per strict increase
    bool never_updated = false;        // 0 updates across >= 2 observations
    int regression_count = 0;          // adjacent version decreases, flagged

    bool operator==(const UpdateStats&) const = default;
};

/// Per-library update statistics over one series' time-ordered
/// observations: an update is an adjacent pair whose version strictly
/// increased, contributing the publish-time delta in days.
std::vector<UpdateStats>
update_history(const SeriesKey& series,
               const std::vector<LibraryObservation>& observations);

struct PersistenceRecord {
    std::string firmware_checksum;
    std::string library;
    std::string cve_id;
    dates::Date firmware_release;
    dates::Date cve_published;
    long delay_days = 0;  // release - published; positive = shipped after disclosure

    bool operator==(const PersistenceRecord&) const = default;
};

/// Signed day gap between CVE publication and the firmware release still
/// shipping the affected version. Throws IncompleteRecordError when either
/// date is absent.
PersistenceRecord persistence_delay(const vulndb::Finding& finding,
                                    const std::optional<dates::Date>& firmware_release,
                                    const std::optional<dates::Date>& cve_published);

struct SeverityDistributions {
    std::map<std::string, int> cvss_histogram;  // "9.8" -> count, 0.1 bins
    std::map<std::string, int> cwe_counts;      // "CWE-119" -> count

    bool operator==(const SeverityDistributions&) const = default;
};

/// Distributions over distinct (firmware, cve) pairs.
SeverityDistributions
severity_distributions(const std::vector<vulndb::Finding>& findings);

/// Source of internet-exposure counts for (library, version) pairs.
class ExposureProvider {
public:
    virtual ~ExposureProvider() = default;
    /// nullopt = unavailable; implementations never fabricate a zero.
    virtual std::optional<long long> device_count(std::string_view library,
                                                  const version::Version& v) const = 0;
};

/// Static-map provider backed by a JSON object "library@version" -> count.
class FixtureExposureProvider : public ExposureProvider {
public:
    static FixtureExposureProvider load(const std::filesystem::path& path);
    static FixtureExposureProvider from_json_text(std::string_view text);

    std::optional<long long> device_count(std::string_view library,
                                          const version::Version& v) const override;

private:
    std::map<std::string, long long> counts_;
};

std::optional<long long> exposure(const vulndb::Finding& finding,
                                  const ExposureProvider& provider);

} // namespace firmscan::analytics
