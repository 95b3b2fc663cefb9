#include "firmscan/analytics.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <regex>
#include <set>

#include <json.hpp>

#include "firmscan/error.hpp"

namespace firmscan::analytics {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
        return static_cast<char>(std::tolower(c));
    });
    return out;
}

// Trailing revision token of a product name: optional separator, optional
// 'v', then a digit-led run of word characters and dots.
const std::regex& revision_token_regex() {
    static const std::regex re(R"([-_ ]?v?\d[\w.]*$)");
    return re;
}

std::string cvss_bin(double score) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%.1f", score);
    return buf;
}

} // namespace

ReleaseIndex ReleaseIndex::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot read release index: " + path.string());
    }
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return from_json_text(text);
}

ReleaseIndex ReleaseIndex::from_json_text(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("release index is not valid JSON: ") +
                          e.what());
    }
    if (!doc.is_object()) {
        throw FormatError("release index top level must be a JSON object");
    }
    ReleaseIndex index;
    for (const auto& [library, versions] : doc.items()) {
        if (!versions.is_array() || versions.empty()) {
            throw FormatError("release list for '" + library +
                              "' must be a non-empty array");
        }
        std::vector<version::Version> releases;
        for (const auto& vs : versions) {
            auto v = version::parse_version_exact(vs.get<std::string>());
            if (!v) {
                throw FormatError("release '" + vs.get<std::string>() +
                                  "' for '" + library +
                                  "' is not a valid version");
            }
            if (!releases.empty() &&
                version::compare(releases.back(), *v) != version::Ordering::less) {
                throw FormatError("release list for '" + library +
                                  "' is not strictly ascending at '" +
                                  vs.get<std::string>() + "'");
            }
            releases.push_back(std::move(*v));
        }
        index.by_library_[lower(library)] = std::move(releases);
    }
    return index;
}

bool ReleaseIndex::contains(std::string_view library) const {
    return by_library_.find(lower(library)) != by_library_.end();
}

std::optional<std::size_t> ReleaseIndex::index_of(std::string_view library,
                                                  const version::Version& v) const {
    const auto it = by_library_.find(lower(library));
    if (it == by_library_.end()) {
        return std::nullopt;
    }
    for (std::size_t i = 0; i < it->second.size(); ++i) {
        if (version::compare(it->second[i], v) == version::Ordering::equal) {
            return i;
        }
    }
    return std::nullopt;
}

const version::Version* ReleaseIndex::newest(std::string_view library) const {
    const auto it = by_library_.find(lower(library));
    return it == by_library_.end() ? nullptr : &it->second.back();
}

std::size_t ReleaseIndex::release_count(std::string_view library) const {
    const auto it = by_library_.find(lower(library));
    return it == by_library_.end() ? 0 : it->second.size();
}

OutdatedLabel label_outdated(std::string_view library,
                             const version::Version& found,
                             const ReleaseIndex& index) {
    const version::Version* newest = index.newest(library);
    if (newest == nullptr) {
        throw NotIndexedError("no release list for '" + std::string(library) + "'");
    }
    OutdatedLabel label;
    label.library = lower(library);
    label.found = found;
    label.newest = *newest;
    label.is_outdated =
        version::compare(found, *newest) == version::Ordering::less;
    const auto found_at = index.index_of(library, found);
    if (found_at) {
        const auto newest_at = index.release_count(library) - 1;
        label.interval_distance = static_cast<int>(newest_at - *found_at);
    }
    return label;
}

SeriesKey series_key(const corpus::FirmwareRecord& record) {
    SeriesKey key;
    key.manufacturer = lower(record.manufacturer);
    std::string product = lower(record.product);
    const std::string stripped =
        std::regex_replace(product, revision_token_regex(), "");
    key.normalized_product = stripped.empty() ? product : stripped;
    return key;
}

std::map<SeriesKey, std::vector<corpus::FirmwareRecord>>
group_series(const std::vector<corpus::FirmwareRecord>& records) {
    std::map<SeriesKey, std::vector<corpus::FirmwareRecord>> out;
    for (const auto& rec : records) {
        out[series_key(rec)].push_back(rec);
    }
    for (auto& [key, members] : out) {
        std::stable_sort(members.begin(), members.end(),
                         [](const corpus::FirmwareRecord& a,
                            const corpus::FirmwareRecord& b) {
                             return a.publish_time < b.publish_time;
                         });
    }
    return out;
}

std::vector<UpdateStats>
update_history(const SeriesKey& series,
               const std::vector<LibraryObservation>& observations) {
    // Group by library, preserving the caller's time order.
    std::map<std::string, std::vector<const LibraryObservation*>> by_library;
    for (const auto& obs : observations) {
        by_library[lower(obs.library)].push_back(&obs);
    }
    std::vector<UpdateStats> out;
    for (const auto& [library, sightings] : by_library) {
        UpdateStats stats;
        stats.series = series;
        stats.library = library;
        for (std::size_t i = 1; i < sightings.size(); ++i) {
            const auto ord = version::compare(sightings[i - 1]->version,
                                              sightings[i]->version);
            if (ord == version::Ordering::less) {
                ++stats.update_count;
                stats.update_delays.push_back(
                    dates::days_between(sightings[i - 1]->publish_time,
                                        sightings[i]->publish_time));
            } else if (ord == version::Ordering::greater) {
                ++stats.regression_count;
            }
        }
        stats.never_updated = stats.update_count == 0 && sightings.size() >= 2;
        out.push_back(std::move(stats));
    }
    return out;
}

PersistenceRecord persistence_delay(const vulndb::Finding& finding,
                                    const std::optional<dates::Date>& firmware_release,
                                    const std::optional<dates::Date>& cve_published) {
    if (!firmware_release || !cve_published) {
        throw IncompleteRecordError("persistence delay needs both dates (" +
                                    finding.cve_id + ")");
    }
    PersistenceRecord rec;
    rec.firmware_checksum = finding.firmware_checksum;
    rec.library = finding.library;
    rec.cve_id = finding.cve_id;
    rec.firmware_release = *firmware_release;
    rec.cve_published = *cve_published;
    rec.delay_days = dates::days_between(*cve_published, *firmware_release);
    return rec;
}

SeverityDistributions
severity_distributions(const std::vector<vulndb::Finding>& findings) {
    SeverityDistributions dist;
    std::set<std::pair<std::string, std::string>> seen;  // (firmware, cve)
    for (const auto& f : findings) {
        if (!seen.emplace(f.firmware_checksum, f.cve_id).second) {
            continue;
        }
        ++dist.cvss_histogram[cvss_bin(f.cvss_base)];
        for (const auto& cwe : f.cwe_ids) {
            ++dist.cwe_counts[cwe];
        }
    }
    return dist;
}

FixtureExposureProvider
FixtureExposureProvider::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot read exposure map: " + path.string());
    }
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return from_json_text(text);
}

FixtureExposureProvider
FixtureExposureProvider::from_json_text(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("exposure map is not valid JSON: ") +
                          e.what());
    }
    if (!doc.is_object()) {
        throw FormatError("exposure map top level must be a JSON object");
    }
    FixtureExposureProvider provider;
    for (const auto& [key, value] : doc.items()) {
        if (!value.is_number_integer()) {
            throw FormatError("exposure count for '" + key +
                              "' must be an integer");
        }
        provider.counts_[lower(key)] = value.get<long long>();
    }
    return provider;
}

std::optional<long long>
FixtureExposureProvider::device_count(std::string_view library,
                                      const version::Version& v) const {
    const auto it = counts_.find(lower(library) + "@" + v.normalized());
    if (it == counts_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::optional<long long> exposure(const vulndb::Finding& finding,
                                  const ExposureProvider& provider) {
    return provider.device_count(finding.library, finding.version);
}

} // namespace firmscan::analytics
