#include "firmscan/vulndb.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <set>

#include <json.hpp>

#include "firmscan/error.hpp"

namespace firmscan::vulndb {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
        return static_cast<char>(std::tolower(c));
    });
    return out;
}

// Splits on ':' honoring backslash escapes (CPE 2.3 formatted strings
// escape special characters with '\').
std::vector<std::string> split_cpe_components(std::string_view s) {
    std::vector<std::string> parts;
    std::string current;
    bool escaped = false;
    for (char c : s) {
        if (escaped) {
            current.push_back(c);
            escaped = false;
        } else if (c == '\\') {
            escaped = true;
        } else if (c == ':') {
            parts.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    parts.push_back(std::move(current));
    return parts;
}

const std::regex& cve_id_regex() {
    static const std::regex re(R"(CVE-\d{4}-\d{4,})");
    return re;
}

bool versions_equal(const version::Version& a, const version::Version& b) {
    return version::compare(a, b) == version::Ordering::equal;
}

bool within_bounds(const version::Version& v, const Applicability& app) {
    using version::Ordering;
    using version::compare;
    if (app.start_incl && compare(v, *app.start_incl) == Ordering::less) {
        return false;
    }
    if (app.start_excl && compare(v, *app.start_excl) != Ordering::greater) {
        return false;
    }
    if (app.end_incl && compare(v, *app.end_incl) == Ordering::greater) {
        return false;
    }
    if (app.end_excl && compare(v, *app.end_excl) != Ordering::less) {
        return false;
    }
    return true;
}

std::optional<Applicability> parse_applicability(const nlohmann::json& body) {
    if (!body.is_object() || !body.contains("cpe") || !body["cpe"].is_string()) {
        return std::nullopt;
    }
    Applicability app;
    try {
        app.cpe = parse_cpe(body["cpe"].get<std::string>());
    } catch (const FormatError&) {
        return std::nullopt;
    }
    auto bound = [&body](const char* key) -> std::optional<version::Version> {
        if (!body.contains(key)) {
            return std::nullopt;
        }
        if (!body[key].is_string()) {
            throw FormatError("range bound must be a string");
        }
        auto v = version::parse_version_exact(body[key].get<std::string>());
        if (!v) {
            throw FormatError("unparseable range bound");
        }
        return v;
    };
    try {
        app.start_incl = bound("version_start_including");
        app.start_excl = bound("version_start_excluding");
        app.end_incl = bound("version_end_including");
        app.end_excl = bound("version_end_excluding");
    } catch (const FormatError&) {
        return std::nullopt;
    }
    if (app.start_incl && app.start_excl) {
        return std::nullopt;
    }
    if (app.end_incl && app.end_excl) {
        return std::nullopt;
    }
    if (!app.cpe.wildcard_version && app.has_bounds()) {
        return std::nullopt;
    }
    return app;
}

} // namespace

CpeName parse_cpe(std::string_view s) {
    CpeName cpe;
    cpe.raw = std::string(s);
    std::vector<std::string> parts;
    if (s.rfind("cpe:2.3:", 0) == 0) {
        parts = split_cpe_components(s.substr(8));
    } else if (s.rfind("cpe:/", 0) == 0) {
        parts = split_cpe_components(s.substr(5));
    } else {
        throw FormatError("not a CPE name: " + cpe.raw);
    }
    if (parts.size() < 4) {
        throw FormatError("CPE has fewer than 4 components: " + cpe.raw);
    }
    if (parts[0].size() != 1 ||
        (parts[0][0] != 'a' && parts[0][0] != 'o' && parts[0][0] != 'h')) {
        throw FormatError("CPE part must be a, o or h: " + cpe.raw);
    }
    cpe.part = parts[0][0];
    cpe.vendor = lower(parts[1]);
    cpe.product = lower(parts[2]);
    const std::string& vt = parts[3];
    if (vt == "*" || vt == "-") {
        cpe.wildcard_version = true;
    } else {
        cpe.version_text = vt;
    }
    return cpe;
}

VulnDatabase VulnDatabase::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot read feed: " + path.string());
    }
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return from_json_text(text);
}

VulnDatabase VulnDatabase::from_json_text(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("feed is not valid JSON: ") + e.what());
    }
    if (!doc.is_array()) {
        throw FormatError("feed top level must be a JSON array");
    }
    VulnDatabase db;
    for (const auto& item : doc) {
        CveEntry entry;
        bool ok = item.is_object() && item.contains("cve_id") &&
                  item["cve_id"].is_string() && item.contains("published") &&
                  item["published"].is_string() && item.contains("cvss_base") &&
                  item["cvss_base"].is_number() &&
                  item.contains("applicability") &&
                  item["applicability"].is_array();
        if (ok) {
            entry.cve_id = item["cve_id"].get<std::string>();
            entry.cvss_base = item["cvss_base"].get<double>();
            ok = std::regex_match(entry.cve_id, cve_id_regex()) &&
                 entry.cvss_base >= 0.0 && entry.cvss_base <= 10.0 &&
                 dates::try_parse_date(item["published"].get<std::string>(),
                                       entry.published);
        }
        if (ok && item.contains("cwe_ids")) {
            if (item["cwe_ids"].is_array()) {
                for (const auto& cwe : item["cwe_ids"]) {
                    if (!cwe.is_string()) {
                        ok = false;
                        break;
                    }
                    entry.cwe_ids.push_back(cwe.get<std::string>());
                }
            } else {
                ok = false;
            }
        }
        if (ok) {
            for (const auto& app : item["applicability"]) {
                auto parsed = parse_applicability(app);
                if (!parsed) {
                    ok = false;
                    break;
                }
                entry.applicability.push_back(std::move(*parsed));
            }
        }
        if (!ok) {
            ++db.malformed_count_;
            continue;
        }
        const std::size_t index = db.entries_.size();
        for (const auto& app : entry.applicability) {
            auto& slots = db.by_product_[app.cpe.product];
            if (slots.empty() || slots.back() != index) {
                slots.push_back(index);
            }
        }
        db.entries_.push_back(std::move(entry));
    }
    return db;
}

std::vector<std::size_t> VulnDatabase::candidates(std::string_view product) const {
    const auto it = by_product_.find(lower(product));
    if (it == by_product_.end()) {
        return {};
    }
    return it->second;
}

std::vector<Finding> match(std::string_view library,
                           const version::Version& v,
                           const VulnDatabase& db,
                           const MatchOptions& opts) {
    const std::string product = lower(library);
    std::vector<Finding> out;
    for (std::size_t index : db.candidates(product)) {
        const CveEntry& entry = db.entries()[index];
        bool matched = false;
        bool only_unversioned = true;
        for (const auto& app : entry.applicability) {
            if (app.cpe.product != product) {
                continue;
            }
            if (app.unversioned()) {
                if (opts.include_unversioned) {
                    matched = true;
                }
                continue;
            }
            bool this_match = false;
            if (!app.cpe.wildcard_version) {
                const auto cpe_version =
                    version::parse_version_exact(app.cpe.version_text);
                this_match = cpe_version && versions_equal(v, *cpe_version);
            } else {
                this_match = within_bounds(v, app);
            }
            if (this_match) {
                matched = true;
                only_unversioned = false;
            }
        }
        if (matched) {
            Finding f;
            f.library = product;
            f.version = v;
            f.cve_id = entry.cve_id;
            f.cvss_base = entry.cvss_base;
            f.cwe_ids = entry.cwe_ids;
            f.cve_published = entry.published;
            f.low_confidence = only_unversioned;
            out.push_back(std::move(f));
        }
    }
    std::sort(out.begin(), out.end(), [](const Finding& a, const Finding& b) {
        return a.cve_id < b.cve_id;
    });
    return out;
}

ScanResult scan_firmware(const std::vector<VersionedOccurrence>& occurrences,
                         const VulnDatabase& db,
                         std::string_view firmware_checksum,
                         const MatchOptions& opts) {
    ScanResult result;
    std::set<std::tuple<std::string, std::string, std::string>> seen;
    for (const auto& vo : occurrences) {
        if (!vo.evidence) {
            result.unversioned.push_back(vo.occurrence);
            continue;
        }
        auto findings = match(vo.occurrence.canonical, vo.evidence->version,
                              db, opts);
        for (auto& f : findings) {
            // The output tuple is (lib, version, CVE); the same library at
            // several paths with the same version reports once.
            if (!seen.emplace(f.library, f.version.normalized(), f.cve_id)
                     .second) {
                continue;
            }
            f.firmware_checksum = std::string(firmware_checksum);
            result.findings.push_back(std::move(f));
        }
    }
    std::sort(result.findings.begin(), result.findings.end(),
              [](const Finding& a, const Finding& b) {
                  const auto ka = std::tie(a.library, a.cve_id);
                  const auto kb = std::tie(b.library, b.cve_id);
                  if (ka != kb) {
                      return ka < kb;
                  }
                  return version::compare(a.version, b.version) ==
                         version::Ordering::less;
              });
    return result;
}

} // namespace firmscan::vulndb
