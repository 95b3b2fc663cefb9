#include "firmscan/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <random>
#include <unordered_set>

#include <json.hpp>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "firmscan/error.hpp"
#include "firmscan/md5.hpp"

namespace fs = std::filesystem;

namespace firmscan::corpus {

namespace {

constexpr const char* kMandatoryKeys[] = {
    "firmware_name", "manufacturer", "device_type", "product",
    "version", "publish_time", "url", "checksum",
};

// Filename component of a URL: text after the last '/',
// with query/fragment stripped.
std::string url_filename(const std::string& url) {
    std::string s = url;
    if (const auto q = s.find_first_of("?#"); q != std::string::npos) {
        s.resize(q);
    }
    const auto slash = s.find_last_of('/');
    return slash == std::string::npos ? std::string{} : s.substr(slash + 1);
}

std::string temp_suffix() {
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(rng()));
    return buf;
}

std::vector<std::uint8_t> fetch_bytes(const std::string& url) {
    if (url.rfind("file://", 0) == 0) {
        std::string path = url.substr(7);
        if (path.rfind("localhost/", 0) == 0) {
            path = path.substr(9);
        }
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            throw FetchError("cannot open " + path);
        }
        return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                         std::istreambuf_iterator<char>());
    }
    const bool https = url.rfind("https://", 0) == 0;
    if (!https && url.rfind("http://", 0) != 0) {
        const auto colon = url.find(':');
        throw UnsupportedSchemeError(
            "unsupported url scheme: " +
            (colon == std::string::npos ? url : url.substr(0, colon)));
    }
    const std::size_t host_start = https ? 8 : 7;
    const auto path_start = url.find('/', host_start);
    const std::string host_port = url.substr(
        host_start,
        path_start == std::string::npos ? std::string::npos
                                        : path_start - host_start);
    const std::string target =
        path_start == std::string::npos ? "/" : url.substr(path_start);
    httplib::Client client((https ? "https://" : "http://") + host_port);
    client.set_follow_location(true);
    auto res = client.Get(target);
    if (!res) {
        throw FetchError("unreachable: " + url);
    }
    if (res->status != 200) {
        throw FetchError("HTTP " + std::to_string(res->status) + " for " + url);
    }
    return std::vector<std::uint8_t>(res->body.begin(), res->body.end());
}

} // namespace

std::string_view to_string(FilterReason r) {
    switch (r) {
    case FilterReason::ok: return "ok";
    case FilterReason::suffix_too_long: return "suffix_too_long";
    case FilterReason::suffix_numeric: return "suffix_numeric";
    case FilterReason::duplicate_checksum: return "duplicate_checksum";
    case FilterReason::missing_metadata: return "missing_metadata";
    }
    return "ok";
}

std::optional<FilterReason> filter_reason_from_string(std::string_view s) {
    if (s == "ok") return FilterReason::ok;
    if (s == "suffix_too_long") return FilterReason::suffix_too_long;
    if (s == "suffix_numeric") return FilterReason::suffix_numeric;
    if (s == "duplicate_checksum") return FilterReason::duplicate_checksum;
    if (s == "missing_metadata") return FilterReason::missing_metadata;
    return std::nullopt;
}

ManifestLoadResult load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot read manifest: " + path.string());
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("manifest is not valid JSON: ") + e.what());
    }
    if (!doc.is_array()) {
        throw FormatError("manifest top level must be a JSON array");
    }

    ManifestLoadResult result;
    for (const auto& item : doc) {
        FirmwareRecord rec;
        bool ok = item.is_object();
        if (ok) {
            for (const char* key : kMandatoryKeys) {
                if (!item.contains(key) || !item[key].is_string() ||
                    item[key].get<std::string>().empty()) {
                    ok = false;
                    break;
                }
            }
        }
        if (ok) {
            rec.firmware_name = item["firmware_name"].get<std::string>();
            rec.manufacturer = item["manufacturer"].get<std::string>();
            rec.device_type = item["device_type"].get<std::string>();
            rec.product = item["product"].get<std::string>();
            rec.version = item["version"].get<std::string>();
            rec.url = item["url"].get<std::string>();
            rec.checksum = item["checksum"].get<std::string>();
            ok = md5::is_checksum(rec.checksum) &&
                 dates::try_parse_date(item["publish_time"].get<std::string>(),
                                       rec.publish_time);
        }
        if (ok) {
            result.records.push_back(std::move(rec));
        } else {
            FirmwareRecord partial;
            if (item.is_object()) {
                auto grab = [&item](const char* key) {
                    return item.contains(key) && item[key].is_string()
                               ? item[key].get<std::string>()
                               : std::string{};
                };
                partial.firmware_name = grab("firmware_name");
                partial.manufacturer = grab("manufacturer");
                partial.device_type = grab("device_type");
                partial.product = grab("product");
                partial.version = grab("version");
                partial.url = grab("url");
                partial.checksum = grab("checksum");
            }
            result.dropped.push_back(CorpusFilterDecision{
                std::move(partial), false, FilterReason::missing_metadata});
        }
    }
    return result;
}

std::vector<FirmwareRecord> dedup(const std::vector<FirmwareRecord>& records) {
    std::vector<CorpusFilterDecision> ignored;
    return dedup(records, ignored);
}

std::vector<FirmwareRecord> dedup(const std::vector<FirmwareRecord>& records,
                                  std::vector<CorpusFilterDecision>& decisions) {
    std::vector<FirmwareRecord> out;
    std::unordered_set<std::string> seen;
    for (const auto& rec : records) {
        if (seen.insert(rec.checksum).second) {
            out.push_back(rec);
        } else {
            decisions.push_back(CorpusFilterDecision{
                rec, false, FilterReason::duplicate_checksum});
        }
    }
    return out;
}

std::vector<CorpusFilterDecision>
filter_unqualified(const std::vector<FirmwareRecord>& records) {
    std::vector<CorpusFilterDecision> out;
    out.reserve(records.size());
    for (const auto& rec : records) {
        const std::string filename = url_filename(rec.url);
        if (filename.empty()) {
            out.push_back(CorpusFilterDecision{rec, false,
                                               FilterReason::missing_metadata});
            continue;
        }
        const auto dot = filename.find_last_of('.');
        if (dot == std::string::npos) {
            // No suffix to judge; the heuristics do not apply.
            out.push_back(CorpusFilterDecision{rec, true, FilterReason::ok});
            continue;
        }
        const std::string suffix = filename.substr(dot + 1);
        if (suffix.size() > 5) {
            out.push_back(CorpusFilterDecision{rec, false,
                                               FilterReason::suffix_too_long});
            continue;
        }
        const auto digits = std::count_if(
            suffix.begin(), suffix.end(),
            [](unsigned char c) { return std::isdigit(c) != 0; });
        if (digits >= 2) {
            out.push_back(CorpusFilterDecision{rec, false,
                                               FilterReason::suffix_numeric});
            continue;
        }
        out.push_back(CorpusFilterDecision{rec, true, FilterReason::ok});
    }
    return out;
}

FirmwareRecord fetch(const FirmwareRecord& record, const fs::path& cache_dir) {
    if (!md5::is_checksum(record.checksum)) {
        throw IntegrityError("record has no valid checksum: " +
                             record.firmware_name);
    }
    std::error_code ec;
    fs::create_directories(cache_dir, ec);
    if (ec || !fs::is_directory(cache_dir)) {
        throw IoError("cache dir unusable: " + cache_dir.string());
    }
    const fs::path final_path = cache_dir / (record.checksum + ".bin");

    FirmwareRecord out = record;
    out.local_path = final_path;
    if (fs::exists(final_path)) {
        // Cache hit: no transfer, but still verified.
        if (md5::hex_digest_file(final_path) != record.checksum) {
            throw IntegrityError("cached file corrupt for " + record.checksum);
        }
        return out;
    }

    const auto bytes = fetch_bytes(record.url);
    const std::string digest = md5::hex_digest(bytes);
    if (digest != record.checksum) {
        throw IntegrityError("checksum mismatch for " + record.firmware_name +
                             ": expected " + record.checksum + ", got " + digest);
    }

    // Write-temp-then-rename so a partial file is never visible under the
    // final cache key; concurrent fetchers race benignly on identical bytes.
    const fs::path tmp_path =
        cache_dir / ("." + record.checksum + ".tmp." + temp_suffix());
    {
        std::ofstream tmp(tmp_path, std::ios::binary);
        if (!tmp) {
            throw IoError("cannot write " + tmp_path.string());
        }
        tmp.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!tmp) {
            throw IoError("short write to " + tmp_path.string());
        }
    }
    fs::rename(tmp_path, final_path, ec);
    if (ec) {
        fs::remove(tmp_path, ec);
        if (!fs::exists(final_path)) {
            throw IoError("cannot finalize cache entry for " + record.checksum);
        }
    }
    return out;
}

} // namespace firmscan::corpus
