#include <doctest.h>

#include <json.hpp>

#include <random>

#include "firmscan/analytics.hpp"
#include "firmscan/error.hpp"

using namespace firmscan;
using namespace firmscan::analytics;
using nlohmann::json;

namespace {

version::Version v(const std::string& text) {
    auto parsed = version::parse_version_exact(text);
    REQUIRE(parsed);
    return *parsed;
}

// busybox release list with exactly 150 releases after 1.9.2, newest 1.36.0.
json busybox_releases() {
    json list = json::array();
    list.push_back("1.9.2");
    for (int i = 0; i < 149; ++i) {
        list.push_back("1." + std::to_string(10 + i / 10) + "." +
                       std::to_string(i % 10));
    }
    list.push_back("1.36.0");
    return list;
}

corpus::FirmwareRecord record(const std::string& manufacturer,
                              const std::string& product,
                              const std::string& date,
                              const std::string& checksum) {
    corpus::FirmwareRecord rec;
    rec.firmware_name = product + "_fw";
    rec.manufacturer = manufacturer;
    rec.device_type = "Router";
    rec.product = product;
    rec.version = "1";
    rec.publish_time = dates::parse_date(date);
    rec.url = "file:///x/" + product + ".bin";
    rec.checksum = checksum;
    return rec;
}

vulndb::Finding finding(const std::string& firmware, const std::string& library,
                        const std::string& ver, const std::string& cve,
                        double cvss, std::vector<std::string> cwes,
                        const std::string& published = "2015-01-01") {
    vulndb::Finding f;
    f.firmware_checksum = firmware;
    f.library = library;
    f.version = v(ver);
    f.cve_id = cve;
    f.cvss_base = cvss;
    f.cwe_ids = std::move(cwes);
    f.cve_published = dates::parse_date(published);
    return f;
}

} // namespace

TEST_SUITE("analytics") {

TEST_CASE("release index validates its input") {
    json doc;
    doc["busybox"] = busybox_releases();
    const auto index = ReleaseIndex::from_json_text(doc.dump());
    CHECK(index.contains("busybox"));
    CHECK(index.release_count("busybox") == 151);
    CHECK(index.newest("busybox")->normalized() == "1.36.0");
    CHECK_FALSE(index.contains("dnsmasq"));

    CHECK_THROWS_AS(
        ReleaseIndex::from_json_text(R"({"x": ["2.0.0", "1.0.0"]})"),
        FormatError);
    CHECK_THROWS_AS(ReleaseIndex::from_json_text(R"({"x": ["not-a-version"]})"),
                    FormatError);
    CHECK_THROWS_AS(ReleaseIndex::from_json_text(R"({"x": []})"), FormatError);
    CHECK_THROWS_AS(ReleaseIndex::from_json_text("[]"), FormatError);
}

TEST_CASE("outdated label reproduces the 150-interval example") {
    json doc;
    doc["busybox"] = busybox_releases();
    const auto index = ReleaseIndex::from_json_text(doc.dump());
    const auto label = label_outdated("busybox", v("1.9.2"), index);
    CHECK(label.is_outdated);
    REQUIRE(label.interval_distance);
    CHECK(*label.interval_distance == 150);
    CHECK(label.newest.normalized() == "1.36.0");
}

TEST_CASE("outdated label edge cases") {
    const auto index = ReleaseIndex::from_json_text(
        R"({"busybox": ["1.9.2", "1.20.0", "1.36.0"]})");

    auto label = label_outdated("busybox", v("1.36.0"), index);
    CHECK_FALSE(label.is_outdated);
    REQUIRE(label.interval_distance);
    CHECK(*label.interval_distance == 0);

    // Found version not in the index: still labeled, distance absent.
    label = label_outdated("busybox", v("1.10.0"), index);
    CHECK(label.is_outdated);
    CHECK_FALSE(label.interval_distance);

    CHECK_THROWS_AS(label_outdated("dnsmasq", v("2.71"), index),
                    NotIndexedError);
}

TEST_CASE("outdated invariants: distance under prepended history") {
    // Adding older releases below the found version shifts found and newest
    // equally, so the distance and the label stay put.
    const auto before = ReleaseIndex::from_json_text(
        R"({"zlib": ["1.2.8", "1.2.11", "1.3.0"]})");
    const auto after = ReleaseIndex::from_json_text(
        R"({"zlib": ["1.0.0", "1.1.0", "1.2.8", "1.2.11", "1.3.0"]})");
    const auto a = label_outdated("zlib", v("1.2.8"), before);
    const auto b = label_outdated("zlib", v("1.2.8"), after);
    CHECK(a.is_outdated == b.is_outdated);
    REQUIRE(a.interval_distance);
    REQUIRE(b.interval_distance);
    CHECK(*a.interval_distance == *b.interval_distance);
    CHECK(*a.interval_distance >= 1);  // outdated and indexed
}

TEST_CASE("series grouping strips the trailing revision token") {
    const auto a = record("D-Link", "DAP-1665-1.10", "2015-03-01", "a1");
    const auto b = record("D-Link", "DAP-1665-1.11", "2016-05-01", "b2");
    const auto series = group_series({b, a});  // unordered input
    REQUIRE(series.size() == 1);
    const auto& [key, members] = *series.begin();
    CHECK(key.manufacturer == "d-link");
    CHECK(key.normalized_product == "dap-1665");
    REQUIRE(members.size() == 2);
    // Time-ordered within the series.
    CHECK(members[0].checksum == "a1");
    CHECK(members[1].checksum == "b2");
}

TEST_CASE("same product under different manufacturers stays separate") {
    const auto a = record("VendorA", "AC-1000", "2015-01-01", "a1");
    const auto b = record("VendorB", "AC-1000", "2015-01-01", "b2");
    CHECK(group_series({a, b}).size() == 2);
    CHECK(group_series({a}).size() == 1);
}

TEST_CASE("update history counts strict increases with day delays") {
    const SeriesKey key{"acme", "ac"};
    std::vector<LibraryObservation> obs{
        {"f1", dates::parse_date("2015-01-01"), "busybox", v("1.9.2")},
        {"f2", dates::parse_date("2017-01-01"), "busybox", v("1.20.0")},
    };
    auto stats = update_history(key, obs);
    REQUIRE(stats.size() == 1);
    CHECK(stats[0].update_count == 1);
    REQUIRE(stats[0].update_delays.size() == 1);
    CHECK(stats[0].update_delays[0] == 731);
    CHECK_FALSE(stats[0].never_updated);
    CHECK(stats[0].regression_count == 0);
}

TEST_CASE("update history: never updated and single sightings") {
    const SeriesKey key{"acme", "ac"};
    std::vector<LibraryObservation> same{
        {"f1", dates::parse_date("2015-01-01"), "dnsmasq", v("2.33")},
        {"f2", dates::parse_date("2016-01-01"), "dnsmasq", v("2.33")},
        {"f3", dates::parse_date("2017-01-01"), "dnsmasq", v("2.33")},
    };
    auto stats = update_history(key, same);
    REQUIRE(stats.size() == 1);
    CHECK(stats[0].update_count == 0);
    CHECK(stats[0].never_updated);

    std::vector<LibraryObservation> single{
        {"f1", dates::parse_date("2015-01-01"), "zlib", v("1.2.8")},
    };
    stats = update_history(key, single);
    REQUIRE(stats.size() == 1);
    CHECK(stats[0].update_count == 0);
    CHECK_FALSE(stats[0].never_updated);  // insufficient observations
}

TEST_CASE("update history flags regressions and matches brute force") {
    const SeriesKey key{"acme", "ac"};
    std::mt19937 rng(31);
    std::vector<LibraryObservation> obs;
    dates::Date day = dates::parse_date("2015-01-01");
    const std::vector<std::string> versions{"1.0.0", "1.1.0", "1.2.0", "2.0.0"};
    for (int i = 0; i < 25; ++i) {
        obs.push_back({"f" + std::to_string(i), day, "busybox",
                       v(versions[rng() % versions.size()])});
        day.ymd = std::chrono::year_month_day{
            std::chrono::sys_days{day.ymd} + std::chrono::days{30}};
    }
    const auto stats = update_history(key, obs);
    REQUIRE(stats.size() == 1);
    int increases = 0;
    int decreases = 0;
    for (std::size_t i = 1; i < obs.size(); ++i) {
        const auto ord = version::compare(obs[i - 1].version, obs[i].version);
        if (ord == version::Ordering::less) ++increases;
        if (ord == version::Ordering::greater) ++decreases;
    }
    CHECK(stats[0].update_count == increases);
    CHECK(stats[0].regression_count == decreases);
    CHECK(stats[0].update_delays.size() == static_cast<std::size_t>(increases));
}

TEST_CASE("persistence delay signs and errors") {
    const auto f = finding("f1", "busybox", "1.21.1", "CVE-2018-1000517", 9.8,
                           {"CWE-119"});
    const auto published = dates::parse_date("2015-01-01");
    const auto released = dates::parse_date("2016-01-01");

    auto rec = persistence_delay(f, released, published);
    CHECK(rec.delay_days == 365);
    rec = persistence_delay(f, published, published);
    CHECK(rec.delay_days == 0);
    rec = persistence_delay(f, dates::parse_date("2014-01-01"), published);
    CHECK(rec.delay_days == -365);

    // Antisymmetric under swapping the two dates.
    const auto forward = persistence_delay(f, released, published);
    const auto backward = persistence_delay(f, published, released);
    CHECK(forward.delay_days == -backward.delay_days);

    CHECK_THROWS_AS(persistence_delay(f, std::nullopt, published),
                    IncompleteRecordError);
    CHECK_THROWS_AS(persistence_delay(f, released, std::nullopt),
                    IncompleteRecordError);
}

TEST_CASE("severity distributions count distinct firmware-cve pairs") {
    std::vector<vulndb::Finding> findings{
        finding("f1", "busybox", "1.21.1", "CVE-1", 9.8, {"CWE-119"}),
        finding("f2", "busybox", "1.21.1", "CVE-1", 9.8, {"CWE-119"}),
        finding("f1", "dnsmasq", "2.71", "CVE-2", 7.5, {"CWE-119", "CWE-400"}),
        finding("f1", "busybox", "1.21.1", "CVE-1", 9.8, {"CWE-119"}),  // dup
    };
    const auto dist = severity_distributions(findings);
    CHECK(dist.cvss_histogram.at("9.8") == 2);
    CHECK(dist.cvss_histogram.at("7.5") == 1);
    CHECK(dist.cwe_counts.at("CWE-119") == 3);
    CHECK(dist.cwe_counts.at("CWE-400") == 1);

    int total = 0;
    for (const auto& [_, n] : dist.cvss_histogram) {
        total += n;
    }
    CHECK(total == 3);  // distinct (firmware, cve) pairs

    const auto empty = severity_distributions({});
    CHECK(empty.cvss_histogram.empty());
    CHECK(empty.cwe_counts.empty());
}

TEST_CASE("exposure provider returns fixture counts, never fabricated zeros") {
    const auto provider = FixtureExposureProvider::from_json_text(R"({
      "dnsmasq@2.71": 417335,
      "iptables@1.4.4": 239603,
      "tcpdump@4.9.2": 689053,
      "dropbear@2011.54": 421048,
      "busybox@1.21.1": 3465
    })");
    auto count = exposure(
        finding("f1", "dnsmasq", "2.71", "CVE-2017-14495", 7.5, {}), provider);
    REQUIRE(count);
    CHECK(*count == 417335);
    count = exposure(
        finding("f1", "iptables", "1.4.4", "CVE-2012-2663", 9.8, {}), provider);
    REQUIRE(count);
    CHECK(*count == 239603);
    CHECK_FALSE(exposure(finding("f1", "nginx", "1.0.0", "CVE-X-1", 1.0, {}),
                         provider));
}

} // TEST_SUITE
