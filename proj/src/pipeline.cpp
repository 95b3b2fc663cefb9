#include "firmscan/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include <json.hpp>

#include "firmscan/error.hpp"
#include "firmscan/libid.hpp"
#include "firmscan/md5.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace firmscan::pipeline {

namespace {

// ---- JSON conversions ----------------------------------------------------

json version_to_json(const version::Version& v) {
    return v.raw;
}

version::Version version_from_json(const json& j) {
    auto v = version::parse_version(j.get<std::string>());
    if (!v) {
        throw FormatError("report contains unparseable version '" +
                          j.get<std::string>() + "'");
    }
    return *v;
}

json record_to_json(const corpus::FirmwareRecord& r) {
    json j;
    j["firmware_name"] = r.firmware_name;
    j["manufacturer"] = r.manufacturer;
    j["device_type"] = r.device_type;
    j["product"] = r.product;
    j["version"] = r.version;
    // Rejected manifest entries may carry no usable date; keep that
    // distinct from a real one so the report round-trips.
    j["publish_time"] = r.publish_time == dates::Date{}
                            ? std::string{}
                            : dates::format_date(r.publish_time);
    j["url"] = r.url;
    j["checksum"] = r.checksum;
    j["local_path"] = r.local_path ? json(r.local_path->string()) : json(nullptr);
    return j;
}

corpus::FirmwareRecord record_from_json(const json& j) {
    corpus::FirmwareRecord r;
    r.firmware_name = j.at("firmware_name").get<std::string>();
    r.manufacturer = j.at("manufacturer").get<std::string>();
    r.device_type = j.at("device_type").get<std::string>();
    r.product = j.at("product").get<std::string>();
    r.version = j.at("version").get<std::string>();
    const std::string pt = j.at("publish_time").get<std::string>();
    if (!pt.empty()) {
        r.publish_time = dates::parse_date(pt);
    }
    r.url = j.at("url").get<std::string>();
    r.checksum = j.at("checksum").get<std::string>();
    if (!j.at("local_path").is_null()) {
        r.local_path = fs::path(j.at("local_path").get<std::string>());
    }
    return r;
}

json verdict_to_json(const unpack::EncryptionVerdict& v) {
    json j;
    j["encrypted"] = v.encrypted;
    j["mean_entropy"] = v.mean_entropy;
    j["entropy_stddev"] = v.entropy_stddev;
    j["windows_sampled"] = v.windows_sampled;
    return j;
}

unpack::EncryptionVerdict verdict_from_json(const json& j) {
    unpack::EncryptionVerdict v;
    v.encrypted = j.at("encrypted").get<bool>();
    v.mean_entropy = j.at("mean_entropy").get<double>();
    v.entropy_stddev = j.at("entropy_stddev").get<double>();
    v.windows_sampled = j.at("windows_sampled").get<std::size_t>();
    return v;
}

unpack::FilesystemType filesystem_from_string(std::string_view s) {
    if (s == "squashfs") return unpack::FilesystemType::squashfs;
    if (s == "jffs2") return unpack::FilesystemType::jffs2;
    if (s == "yaffs2") return unpack::FilesystemType::yaffs2;
    if (s == "ext2") return unpack::FilesystemType::ext2;
    if (s == "cramfs") return unpack::FilesystemType::cramfs;
    return unpack::FilesystemType::unknown;
}

unpack::Architecture architecture_from_string(std::string_view s) {
    if (s == "mips") return unpack::Architecture::mips;
    if (s == "arm") return unpack::Architecture::arm;
    if (s == "x86") return unpack::Architecture::x86;
    if (s == "x86_64") return unpack::Architecture::x86_64;
    if (s == "powerpc") return unpack::Architecture::powerpc;
    return unpack::Architecture::unknown;
}

unpack::OsFamily os_from_string(std::string_view s) {
    if (s == "linux") return unpack::OsFamily::linux_os;
    if (s == "vxworks") return unpack::OsFamily::vxworks;
    if (s == "cisco_os") return unpack::OsFamily::cisco_os;
    if (s == "windows_ce") return unpack::OsFamily::windows_ce;
    if (s == "minix") return unpack::OsFamily::minix;
    return unpack::OsFamily::unknown;
}

json traits_to_json(const unpack::FirmwareTraits& t) {
    json j;
    j["filesystem_type"] = std::string(unpack::to_string(t.filesystem_type));
    j["architecture"] = std::string(unpack::to_string(t.architecture));
    j["os_family"] = std::string(unpack::to_string(t.os_family));
    return j;
}

unpack::FirmwareTraits traits_from_json(const json& j) {
    unpack::FirmwareTraits t;
    t.filesystem_type =
        filesystem_from_string(j.at("filesystem_type").get<std::string>());
    t.architecture =
        architecture_from_string(j.at("architecture").get<std::string>());
    t.os_family = os_from_string(j.at("os_family").get<std::string>());
    return t;
}

json occurrence_to_json(const libid::LibraryOccurrence& o) {
    json j;
    j["firmware_checksum"] = o.firmware_checksum;
    j["canonical"] = o.canonical;
    j["category"] = std::string(libid::to_string(o.category));
    j["file_path"] = o.file_path;
    j["matched_alias"] = o.matched_alias;
    return j;
}

libid::LibraryOccurrence occurrence_from_json(const json& j) {
    libid::LibraryOccurrence o;
    o.firmware_checksum = j.at("firmware_checksum").get<std::string>();
    o.canonical = j.at("canonical").get<std::string>();
    o.category = libid::category_from_string(j.at("category").get<std::string>())
                     .value_or(libid::Category::open_source);
    o.file_path = j.at("file_path").get<std::string>();
    o.matched_alias = j.at("matched_alias").get<std::string>();
    return o;
}

json versioned_occurrence_to_json(const vulndb::VersionedOccurrence& vo) {
    json j;
    j["occurrence"] = occurrence_to_json(vo.occurrence);
    if (vo.evidence) {
        json e;
        e["version"] = version_to_json(vo.evidence->version);
        e["source_string"] = vo.evidence->source_string;
        e["byte_offset"] = vo.evidence->byte_offset;
        j["evidence"] = e;
    } else {
        j["evidence"] = nullptr;
    }
    return j;
}

vulndb::VersionedOccurrence versioned_occurrence_from_json(const json& j) {
    vulndb::VersionedOccurrence vo;
    vo.occurrence = occurrence_from_json(j.at("occurrence"));
    if (!j.at("evidence").is_null()) {
        const json& e = j.at("evidence");
        version::VersionEvidence ev;
        ev.version = version_from_json(e.at("version"));
        ev.source_string = e.at("source_string").get<std::string>();
        ev.byte_offset = e.at("byte_offset").get<std::size_t>();
        vo.evidence = std::move(ev);
    }
    return vo;
}

json finding_to_json(const vulndb::Finding& f) {
    json j;
    j["firmware_checksum"] = f.firmware_checksum;
    j["library"] = f.library;
    j["version"] = version_to_json(f.version);
    j["cve_id"] = f.cve_id;
    j["cvss_base"] = f.cvss_base;
    j["cwe_ids"] = f.cwe_ids;
    j["cve_published"] = dates::format_date(f.cve_published);
    j["low_confidence"] = f.low_confidence;
    return j;
}

vulndb::Finding finding_from_json(const json& j) {
    vulndb::Finding f;
    f.firmware_checksum = j.at("firmware_checksum").get<std::string>();
    f.library = j.at("library").get<std::string>();
    f.version = version_from_json(j.at("version"));
    f.cve_id = j.at("cve_id").get<std::string>();
    f.cvss_base = j.at("cvss_base").get<double>();
    f.cwe_ids = j.at("cwe_ids").get<std::vector<std::string>>();
    f.cve_published = dates::parse_date(j.at("cve_published").get<std::string>());
    f.low_confidence = j.at("low_confidence").get<bool>();
    return f;
}

json decision_to_json(const corpus::CorpusFilterDecision& d) {
    json j;
    j["record"] = record_to_json(d.record);
    j["kept"] = d.kept;
    j["reason"] = std::string(corpus::to_string(d.reason));
    return j;
}

corpus::CorpusFilterDecision decision_from_json(const json& j) {
    corpus::CorpusFilterDecision d;
    d.record = record_from_json(j.at("record"));
    d.kept = j.at("kept").get<bool>();
    d.reason = corpus::filter_reason_from_string(j.at("reason").get<std::string>())
                   .value_or(corpus::FilterReason::ok);
    return d;
}

json firmware_report_to_json(const FirmwareReport& fr) {
    json j;
    j["record"] = record_to_json(fr.record);
    j["encryption"] = verdict_to_json(fr.encryption);
    j["traits"] = traits_to_json(fr.traits);
    json occurrences = json::array();
    for (const auto& vo : fr.occurrences) {
        occurrences.push_back(versioned_occurrence_to_json(vo));
    }
    j["occurrences"] = std::move(occurrences);
    json findings = json::array();
    for (const auto& f : fr.findings) {
        findings.push_back(finding_to_json(f));
    }
    j["findings"] = std::move(findings);
    json unversioned = json::array();
    for (const auto& o : fr.unversioned) {
        unversioned.push_back(occurrence_to_json(o));
    }
    j["unversioned"] = std::move(unversioned);
    return j;
}

FirmwareReport firmware_report_from_json(const json& j) {
    FirmwareReport fr;
    fr.record = record_from_json(j.at("record"));
    fr.encryption = verdict_from_json(j.at("encryption"));
    fr.traits = traits_from_json(j.at("traits"));
    for (const auto& vo : j.at("occurrences")) {
        fr.occurrences.push_back(versioned_occurrence_from_json(vo));
    }
    for (const auto& f : j.at("findings")) {
        fr.findings.push_back(finding_from_json(f));
    }
    for (const auto& o : j.at("unversioned")) {
        fr.unversioned.push_back(occurrence_from_json(o));
    }
    return fr;
}

json outdated_to_json(const OutdatedRecord& o) {
    json j;
    j["firmware_checksum"] = o.firmware_checksum;
    j["library"] = o.label.library;
    j["found"] = version_to_json(o.label.found);
    j["newest"] = version_to_json(o.label.newest);
    j["is_outdated"] = o.label.is_outdated;
    j["interval_distance"] = o.label.interval_distance
                                 ? json(*o.label.interval_distance)
                                 : json(nullptr);
    return j;
}

OutdatedRecord outdated_from_json(const json& j) {
    OutdatedRecord o;
    o.firmware_checksum = j.at("firmware_checksum").get<std::string>();
    o.label.library = j.at("library").get<std::string>();
    o.label.found = version_from_json(j.at("found"));
    o.label.newest = version_from_json(j.at("newest"));
    o.label.is_outdated = j.at("is_outdated").get<bool>();
    if (!j.at("interval_distance").is_null()) {
        o.label.interval_distance = j.at("interval_distance").get<int>();
    }
    return o;
}

json update_stats_to_json(const analytics::UpdateStats& u) {
    json j;
    j["manufacturer"] = u.series.manufacturer;
    j["series"] = u.series.normalized_product;
    j["library"] = u.library;
    j["update_count"] = u.update_count;
    j["update_delays"] = u.update_delays;
    j["never_updated"] = u.never_updated;
    j["regression_count"] = u.regression_count;
    return j;
}

analytics::UpdateStats update_stats_from_json(const json& j) {
    analytics::UpdateStats u;
    u.series.manufacturer = j.at("manufacturer").get<std::string>();
    u.series.normalized_product = j.at("series").get<std::string>();
    u.library = j.at("library").get<std::string>();
    u.update_count = j.at("update_count").get<int>();
    u.update_delays = j.at("update_delays").get<std::vector<long>>();
    u.never_updated = j.at("never_updated").get<bool>();
    u.regression_count = j.at("regression_count").get<int>();
    return u;
}

json persistence_to_json(const analytics::PersistenceRecord& p) {
    json j;
    j["firmware_checksum"] = p.firmware_checksum;
    j["library"] = p.library;
    j["cve_id"] = p.cve_id;
    j["firmware_release"] = dates::format_date(p.firmware_release);
    j["cve_published"] = dates::format_date(p.cve_published);
    j["delay_days"] = p.delay_days;
    return j;
}

analytics::PersistenceRecord persistence_from_json(const json& j) {
    analytics::PersistenceRecord p;
    p.firmware_checksum = j.at("firmware_checksum").get<std::string>();
    p.library = j.at("library").get<std::string>();
    p.cve_id = j.at("cve_id").get<std::string>();
    p.firmware_release = dates::parse_date(j.at("firmware_release").get<std::string>());
    p.cve_published = dates::parse_date(j.at("cve_published").get<std::string>());
    p.delay_days = j.at("delay_days").get<long>();
    return p;
}

json report_to_json(const Report& r) {
    json j;
    json firmware = json::array();
    for (const auto& fr : r.firmware) {
        firmware.push_back(firmware_report_to_json(fr));
    }
    j["firmware"] = std::move(firmware);
    json quarantined = json::array();
    for (const auto& q : r.quarantined) {
        json e;
        e["record"] = record_to_json(q.record);
        e["stage"] = q.stage;
        e["error"] = q.error;
        quarantined.push_back(std::move(e));
    }
    j["quarantined"] = std::move(quarantined);
    json rejected = json::array();
    for (const auto& d : r.rejected) {
        rejected.push_back(decision_to_json(d));
    }
    j["rejected"] = std::move(rejected);

    json corpus_section;
    json outdated = json::array();
    for (const auto& o : r.outdated) {
        outdated.push_back(outdated_to_json(o));
    }
    corpus_section["outdated"] = std::move(outdated);
    json not_indexed = json::array();
    for (const auto& n : r.not_indexed) {
        json e;
        e["firmware_checksum"] = n.firmware_checksum;
        e["library"] = n.library;
        e["version"] = n.version;
        not_indexed.push_back(std::move(e));
    }
    corpus_section["not_indexed"] = std::move(not_indexed);
    json update_stats = json::array();
    for (const auto& u : r.update_stats) {
        update_stats.push_back(update_stats_to_json(u));
    }
    corpus_section["update_stats"] = std::move(update_stats);
    json persistence = json::array();
    for (const auto& p : r.persistence) {
        persistence.push_back(persistence_to_json(p));
    }
    corpus_section["persistence"] = std::move(persistence);
    corpus_section["severity"] = {
        {"cvss", r.severity.cvss_histogram},
        {"cwe", r.severity.cwe_counts},
    };
    corpus_section["exposure"] = r.exposure;
    corpus_section["exposure_unavailable"] = r.exposure_unavailable;
    j["corpus"] = std::move(corpus_section);

    j["totals"] = {
        {"firmware_count", r.totals.firmware_count},
        {"library_count", r.totals.library_count},
        {"finding_count", r.totals.finding_count},
        {"distinct_cve_count", r.totals.distinct_cve_count},
    };
    return j;
}

Report report_from_json(const json& j) {
    Report r;
    for (const auto& fr : j.at("firmware")) {
        r.firmware.push_back(firmware_report_from_json(fr));
    }
    for (const auto& q : j.at("quarantined")) {
        r.quarantined.push_back(QuarantineEntry{
            record_from_json(q.at("record")),
            q.at("stage").get<std::string>(),
            q.at("error").get<std::string>()});
    }
    for (const auto& d : j.at("rejected")) {
        r.rejected.push_back(decision_from_json(d));
    }
    const json& corpus_section = j.at("corpus");
    for (const auto& o : corpus_section.at("outdated")) {
        r.outdated.push_back(outdated_from_json(o));
    }
    for (const auto& n : corpus_section.at("not_indexed")) {
        r.not_indexed.push_back(NotIndexedRecord{
            n.at("firmware_checksum").get<std::string>(),
            n.at("library").get<std::string>(),
            n.at("version").get<std::string>()});
    }
    for (const auto& u : corpus_section.at("update_stats")) {
        r.update_stats.push_back(update_stats_from_json(u));
    }
    for (const auto& p : corpus_section.at("persistence")) {
        r.persistence.push_back(persistence_from_json(p));
    }
    r.severity.cvss_histogram =
        corpus_section.at("severity").at("cvss").get<std::map<std::string, int>>();
    r.severity.cwe_counts =
        corpus_section.at("severity").at("cwe").get<std::map<std::string, int>>();
    r.exposure = corpus_section.at("exposure").get<std::map<std::string, long long>>();
    r.exposure_unavailable =
        corpus_section.at("exposure_unavailable").get<std::vector<std::string>>();
    const json& totals = j.at("totals");
    r.totals.firmware_count = totals.at("firmware_count").get<std::size_t>();
    r.totals.library_count = totals.at("library_count").get<std::size_t>();
    r.totals.finding_count = totals.at("finding_count").get<std::size_t>();
    r.totals.distinct_cve_count = totals.at("distinct_cve_count").get<std::size_t>();
    return r;
}

// ---- pipeline ------------------------------------------------------------

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot read " + path.string());
    }
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                     std::istreambuf_iterator<char>());
}

struct LoadedInputs {
    libid::TermDictionary dict;
    vulndb::VulnDatabase db;
    analytics::ReleaseIndex releases;
    std::optional<analytics::FixtureExposureProvider> provider;
};

LoadedInputs load_inputs(const PipelineConfig& config) {
    try {
        LoadedInputs inputs{
            libid::TermDictionary::load(config.dict_path),
            vulndb::VulnDatabase::load(config.feed_path),
            analytics::ReleaseIndex::load(config.releases_path),
            std::nullopt,
        };
        if (config.exposure_path) {
            inputs.provider =
                analytics::FixtureExposureProvider::load(*config.exposure_path);
        }
        return inputs;
    } catch (const Error& e) {
        throw ConfigError(std::string("input loading failed: ") + e.what());
    }
}

// One firmware through fetch -> entropy -> extract -> libid -> version ->
// vulndb. Throws nothing; failures come back as a quarantine entry.
struct ImageOutcome {
    std::optional<FirmwareReport> report;
    std::optional<QuarantineEntry> quarantine;
};

ImageOutcome process_image(const corpus::FirmwareRecord& record,
                           const PipelineConfig& config,
                           const LoadedInputs& inputs) {
    auto quarantine = [&record](const char* stage, const std::string& error) {
        ImageOutcome out;
        out.quarantine = QuarantineEntry{record, stage, error};
        return out;
    };

    corpus::FirmwareRecord fetched;
    try {
        fetched = corpus::fetch(record, config.cache_dir);
    } catch (const std::exception& e) {
        return quarantine("fetch", e.what());
    }

    std::vector<std::uint8_t> blob;
    try {
        blob = read_file_bytes(*fetched.local_path);
    } catch (const std::exception& e) {
        return quarantine("read", e.what());
    }

    FirmwareReport fr;
    fr.record = fetched;
    try {
        fr.encryption = unpack::classify_encryption(blob);
    } catch (const std::exception& e) {
        return quarantine("classify", e.what());
    }

    unpack::FilesystemTree tree;
    if (!fr.encryption.encrypted) {
        const fs::path workdir =
            config.cache_dir / (fetched.checksum + ".fs");
        try {
            std::error_code ec;
            fs::remove_all(workdir, ec);
            tree = unpack::extract(blob, workdir, config.max_depth);
        } catch (const std::exception& e) {
            return quarantine("extract", e.what());
        }
    }

    try {
        fr.traits = unpack::detect_traits(blob, tree);
        const auto occurrences =
            libid::find_libraries(tree, inputs.dict, fetched.checksum);
        for (const auto& occ : occurrences) {
            vulndb::VersionedOccurrence vo;
            vo.occurrence = occ;
            try {
                const auto bytes = read_file_bytes(tree.root / occ.file_path);
                vo.evidence = version::extract_library_version(
                    bytes, occ.canonical, config.region_limit);
            } catch (const IoError&) {
                // unreadable member: keep the occurrence, no evidence
            }
            fr.occurrences.push_back(std::move(vo));
        }

        vulndb::MatchOptions opts;
        opts.include_unversioned = config.match_unversioned;
        auto scan = vulndb::scan_firmware(fr.occurrences, inputs.db,
                                          fetched.checksum, opts);
        fr.findings = std::move(scan.findings);
        fr.unversioned = std::move(scan.unversioned);
    } catch (const std::exception& e) {
        return quarantine("scan", e.what());
    }
    return ImageOutcome{std::move(fr), std::nullopt};
}

} // namespace

void recompute_corpus_analytics(Report& report,
                                const analytics::ReleaseIndex& releases,
                                const analytics::ExposureProvider* provider) {
    report.outdated.clear();
    report.not_indexed.clear();
    report.update_stats.clear();
    report.persistence.clear();
    report.exposure.clear();
    report.exposure_unavailable.clear();

    // Outdated labels, one per distinct (firmware, library, version).
    for (const auto& fr : report.firmware) {
        std::set<std::pair<std::string, std::string>> seen;
        for (const auto& vo : fr.occurrences) {
            if (!vo.evidence) {
                continue;
            }
            const auto key = std::make_pair(vo.occurrence.canonical,
                                            vo.evidence->version.normalized());
            if (!seen.insert(key).second) {
                continue;
            }
            try {
                auto label = analytics::label_outdated(
                    vo.occurrence.canonical, vo.evidence->version, releases);
                report.outdated.push_back(
                    OutdatedRecord{fr.record.checksum, std::move(label)});
            } catch (const NotIndexedError&) {
                report.not_indexed.push_back(NotIndexedRecord{
                    fr.record.checksum, vo.occurrence.canonical,
                    vo.evidence->version.normalized()});
            }
        }
    }

    // Update histories per device series.
    std::vector<corpus::FirmwareRecord> records;
    std::map<std::string, const FirmwareReport*> by_checksum;
    for (const auto& fr : report.firmware) {
        records.push_back(fr.record);
        by_checksum[fr.record.checksum] = &fr;
    }
    for (const auto& [key, members] : analytics::group_series(records)) {
        std::vector<analytics::LibraryObservation> observations;
        for (const auto& rec : members) {
            const FirmwareReport* fr = by_checksum.at(rec.checksum);
            std::set<std::string> seen;  // first evidence per library
            for (const auto& vo : fr->occurrences) {
                if (!vo.evidence || !seen.insert(vo.occurrence.canonical).second) {
                    continue;
                }
                observations.push_back(analytics::LibraryObservation{
                    rec.checksum, rec.publish_time, vo.occurrence.canonical,
                    vo.evidence->version});
            }
        }
        auto stats = analytics::update_history(key, observations);
        report.update_stats.insert(report.update_stats.end(),
                                   std::make_move_iterator(stats.begin()),
                                   std::make_move_iterator(stats.end()));
    }

    // Persistence delays and severity over all findings.
    std::vector<vulndb::Finding> all_findings;
    for (const auto& fr : report.firmware) {
        for (const auto& f : fr.findings) {
            report.persistence.push_back(analytics::persistence_delay(
                f, fr.record.publish_time, f.cve_published));
            all_findings.push_back(f);
        }
    }
    report.severity = analytics::severity_distributions(all_findings);

    if (provider != nullptr) {
        std::set<std::pair<std::string, std::string>> pairs;
        for (const auto& f : all_findings) {
            pairs.emplace(f.library, f.version.normalized());
        }
        for (const auto& [library, ver] : pairs) {
            const auto v = version::parse_version(ver);
            const auto count = v ? provider->device_count(library, *v)
                                 : std::nullopt;
            const std::string key = library + "@" + ver;
            if (count) {
                report.exposure[key] = *count;
            } else {
                report.exposure_unavailable.push_back(key);
            }
        }
    }

    // Totals, recomputable from the per-firmware sections.
    Totals totals;
    totals.firmware_count = report.firmware.size();
    std::set<std::string> libraries;
    std::set<std::string> cves;
    std::size_t finding_count = 0;
    for (const auto& fr : report.firmware) {
        for (const auto& vo : fr.occurrences) {
            libraries.insert(vo.occurrence.canonical);
        }
        finding_count += fr.findings.size();
        for (const auto& f : fr.findings) {
            cves.insert(f.cve_id);
        }
    }
    totals.library_count = libraries.size();
    totals.finding_count = finding_count;
    totals.distinct_cve_count = cves.size();
    report.totals = totals;
}

Report run_pipeline(const PipelineConfig& config) {
    if (config.max_depth < 1) {
        throw ConfigError("max_depth must be >= 1");
    }
    if (config.cache_dir.empty()) {
        throw ConfigError("cache_dir must be set");
    }
    const LoadedInputs inputs = load_inputs(config);

    corpus::ManifestLoadResult manifest;
    try {
        manifest = corpus::load_manifest(config.manifest_path);
    } catch (const Error& e) {
        throw ConfigError(std::string("manifest loading failed: ") + e.what());
    }

    Report report;
    report.rejected = manifest.dropped;
    auto records = corpus::dedup(manifest.records, report.rejected);
    std::vector<corpus::FirmwareRecord> kept;
    for (auto& decision : corpus::filter_unqualified(records)) {
        if (decision.kept) {
            kept.push_back(decision.record);
        } else {
            report.rejected.push_back(decision);
        }
    }

    // Bounded worker pool; results land in manifest order.
    std::vector<ImageOutcome> outcomes(kept.size());
    const unsigned hw = std::thread::hardware_concurrency();
    const std::size_t workers = std::min<std::size_t>(
        kept.empty() ? 1 : kept.size(),
        config.jobs > 0 ? static_cast<std::size_t>(config.jobs)
                        : std::max(1u, hw));
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= kept.size()) {
                return;
            }
            try {
                outcomes[i] = process_image(kept[i], config, inputs);
            } catch (...) {
                // process_image quarantines its own failures; this is the
                // backstop that keeps a worker thread from terminating.
                outcomes[i].quarantine =
                    QuarantineEntry{kept[i], "internal", "unexpected error"};
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i + 1 < workers; ++i) {
        pool.emplace_back(worker);
    }
    worker();
    for (auto& t : pool) {
        t.join();
    }

    for (auto& outcome : outcomes) {
        if (outcome.report) {
            report.firmware.push_back(std::move(*outcome.report));
        } else if (outcome.quarantine) {
            report.quarantined.push_back(std::move(*outcome.quarantine));
        }
    }

    recompute_corpus_analytics(report, inputs.releases,
                               inputs.provider ? &*inputs.provider : nullptr);
    return report;
}

std::string report_to_json_text(const Report& report) {
    return report_to_json(report).dump(2) + "\n";
}

Report report_from_json_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("report is not valid JSON: ") + e.what());
    }
    return report_from_json(doc);
}

void emit_report(const Report& report,
                 const fs::path& output_path,
                 OutputFormat format) {
    std::ofstream out(output_path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write report to " + output_path.string());
    }
    if (format == OutputFormat::json) {
        out << report_to_json_text(report);
    } else {
        out << "firmware_checksum,library,version,cve_id,cvss,delay_days\n";
        std::map<std::string, dates::Date> release_dates;
        for (const auto& fr : report.firmware) {
            release_dates[fr.record.checksum] = fr.record.publish_time;
        }
        char cvss[8];
        for (const auto& fr : report.firmware) {
            for (const auto& f : fr.findings) {
                std::snprintf(cvss, sizeof cvss, "%.1f", f.cvss_base);
                const long delay = dates::days_between(
                    f.cve_published, release_dates.at(f.firmware_checksum));
                out << f.firmware_checksum << ',' << f.library << ','
                    << f.version.normalized() << ',' << f.cve_id << ','
                    << cvss << ',' << delay << '\n';
            }
        }
    }
    if (!out) {
        throw IoError("write failed for " + output_path.string());
    }
}

} // namespace firmscan::pipeline
