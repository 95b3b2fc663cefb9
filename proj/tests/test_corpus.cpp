#include <doctest.h>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <map>
#include <thread>

#include "firmscan/corpus.hpp"
#include "firmscan/error.hpp"
#include "firmscan/md5.hpp"
#include "test_util.hpp"

using namespace firmscan;
using namespace firmscan::corpus;
using testutil::to_bytes;

namespace {

const char* kTable8Manifest = R"([
  {
    "firmware_name": "DCS-6517_REVB_FIRMWARE_v2.01.00",
    "manufacturer": "D-Link",
    "device_type": "Camera",
    "product": "DCS-6517",
    "version": "V2.01.00",
    "publish_time": "2020-07-09",
    "url": "ftp://FTP2.DLINK.COM/PRODUCTS/DCS-6517/REVB/DCS-6517_REVB_FIRMWARE_v2.01.00.zip",
    "checksum": "8773593588fcb789c88d8275b49d7d7f"
  }
])";

FirmwareRecord record_with(const std::string& checksum,
                           const std::string& url = "file:///tmp/none.bin") {
    FirmwareRecord rec;
    rec.firmware_name = "fw_" + checksum.substr(0, 4);
    rec.manufacturer = "Acme";
    rec.device_type = "Router";
    rec.product = "AC-1000";
    rec.version = "1.0";
    rec.publish_time = dates::parse_date("2020-01-01");
    rec.url = url;
    rec.checksum = checksum;
    return rec;
}

std::string fake_checksum(int i) {
    char buf[33];
    std::snprintf(buf, sizeof buf, "%032x", i);
    return buf;
}

} // namespace

TEST_SUITE("corpus") {

TEST_CASE("md5 matches the known vectors") {
    CHECK(md5::hex_digest(to_bytes("abc")) ==
          "900150983cd24fb0d6963f7d28e17f72");
    CHECK(md5::hex_digest({}) == "d41d8cd98f00b204e9800998ecf8427e");
    CHECK(md5::is_checksum("8773593588fcb789c88d8275b49d7d7f"));
    CHECK_FALSE(md5::is_checksum("8773593588FCB789C88D8275B49D7D7F"));
    CHECK_FALSE(md5::is_checksum("877359"));
}

TEST_CASE("manifest loads the documented record shape") {
    testutil::TempDir tmp;
    const auto path = tmp.path() / "manifest.json";
    testutil::write_file(path, std::string(kTable8Manifest));
    const auto result = load_manifest(path);
    REQUIRE(result.records.size() == 1);
    CHECK(result.dropped.empty());
    const auto& rec = result.records[0];
    CHECK(rec.firmware_name == "DCS-6517_REVB_FIRMWARE_v2.01.00");
    CHECK(rec.manufacturer == "D-Link");
    CHECK(rec.device_type == "Camera");
    CHECK(rec.product == "DCS-6517");
    CHECK(rec.version == "V2.01.00");
    CHECK(dates::format_date(rec.publish_time) == "2020-07-09");
    CHECK(rec.checksum == "8773593588fcb789c88d8275b49d7d7f");
    CHECK_FALSE(rec.local_path);
}

TEST_CASE("manifest edge inputs") {
    testutil::TempDir tmp;
    const auto path = tmp.path() / "manifest.json";

    testutil::write_file(path, std::string("[]"));
    CHECK(load_manifest(path).records.empty());

    // Missing checksum drops the entry and reports it.
    testutil::write_file(path, std::string(R"([{
      "firmware_name": "x", "manufacturer": "y", "device_type": "z",
      "product": "p", "version": "1", "publish_time": "2020-01-01",
      "url": "http://example/fw.bin"
    }])"));
    auto result = load_manifest(path);
    CHECK(result.records.empty());
    REQUIRE(result.dropped.size() == 1);
    CHECK(result.dropped[0].reason == FilterReason::missing_metadata);
    CHECK_FALSE(result.dropped[0].kept);

    // Unparseable date or checksum counts as missing metadata.
    testutil::write_file(path, std::string(R"([{
      "firmware_name": "x", "manufacturer": "y", "device_type": "z",
      "product": "p", "version": "1", "publish_time": "not-a-date",
      "url": "http://example/fw.bin",
      "checksum": "8773593588fcb789c88d8275b49d7d7f"
    }])"));
    result = load_manifest(path);
    CHECK(result.records.empty());
    CHECK(result.dropped.size() == 1);

    testutil::write_file(path, std::string("{\"not\": \"array\"}"));
    CHECK_THROWS_AS(load_manifest(path), FormatError);

    CHECK_THROWS_AS(load_manifest(tmp.path() / "absent.json"), IoError);
}

TEST_CASE("dedup keeps the first record per checksum in order") {
    const auto a = record_with("8773593588fcb789c88d8275b49d7d7f");
    auto b = record_with("8773593588fcb789c88d8275b49d7d7f");
    b.firmware_name = "duplicate";
    const auto c = record_with(fake_checksum(3));

    std::vector<CorpusFilterDecision> decisions;
    const auto out = dedup({a, b, c}, decisions);
    REQUIRE(out.size() == 2);
    CHECK(out[0].firmware_name == a.firmware_name);
    CHECK(out[1].checksum == c.checksum);
    REQUIRE(decisions.size() == 1);
    CHECK(decisions[0].reason == FilterReason::duplicate_checksum);
    CHECK(decisions[0].record.firmware_name == "duplicate");

    CHECK(dedup({}).empty());
    CHECK(dedup({a, c}).size() == 2);
}

TEST_CASE("dedup is idempotent and permutation-stable on checksums") {
    std::mt19937 rng(11);
    std::vector<FirmwareRecord> records;
    for (int i = 0; i < 40; ++i) {
        records.push_back(record_with(fake_checksum(rng() % 12)));
    }
    const auto once = dedup(records);
    CHECK(dedup(once) == once);

    auto shuffled = records;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto other = dedup(shuffled);
    auto checksums = [](const std::vector<FirmwareRecord>& v) {
        std::set<std::string> out;
        for (const auto& r : v) {
            out.insert(r.checksum);
        }
        return out;
    };
    CHECK(checksums(once) == checksums(other));
    CHECK(once.size() == other.size());
}

TEST_CASE("suffix heuristics reject long and numeric formats") {
    const auto r605 = record_with(fake_checksum(1), "http://host/fw.605");
    const auto rbin = record_with(fake_checksum(2), "http://host/fw.bin");
    const auto rupd = record_with(fake_checksum(3), "http://host/fw.update");
    const auto rnone = record_with(fake_checksum(4), "http://host/dir/");
    const auto r7z = record_with(fake_checksum(5), "http://host/fw.7z");
    const auto decisions =
        filter_unqualified({r605, rbin, rupd, rnone, r7z});
    REQUIRE(decisions.size() == 5);
    CHECK_FALSE(decisions[0].kept);
    CHECK(decisions[0].reason == FilterReason::suffix_numeric);
    CHECK(decisions[1].kept);
    CHECK(decisions[1].reason == FilterReason::ok);
    CHECK_FALSE(decisions[2].kept);
    CHECK(decisions[2].reason == FilterReason::suffix_too_long);
    CHECK_FALSE(decisions[3].kept);
    CHECK(decisions[3].reason == FilterReason::missing_metadata);
    CHECK(decisions[4].kept);  // single digit is fine

    for (const auto& d : decisions) {
        CHECK(d.kept == (d.reason == FilterReason::ok));
    }
}

TEST_CASE("suffix decision is a pure function of the suffix") {
    const std::vector<std::string> suffixes{"bin", "605", "update", "7z", "zip"};
    for (const auto& suffix : suffixes) {
        const auto a = filter_unqualified(
            {record_with(fake_checksum(1), "http://h/first." + suffix)});
        const auto b = filter_unqualified(
            {record_with(fake_checksum(2),
                         "https://other.example/deep/path/second." + suffix)});
        CHECK(a[0].kept == b[0].kept);
        CHECK(a[0].reason == b[0].reason);
    }
}

TEST_CASE("fetch verifies, caches and is idempotent") {
    testutil::TempDir tmp;
    const auto blob = to_bytes("firmware image body 0123456789");
    const auto source = tmp.path() / "src" / "image.bin";
    testutil::write_file(source, blob);
    auto rec = record_with(md5::hex_digest(blob), "file://" + source.string());

    const auto cache = tmp.path() / "cache";
    const auto fetched = fetch(rec, cache);
    REQUIRE(fetched.local_path);
    CHECK(testutil::read_file(*fetched.local_path) == blob);

    // Cache hit must not touch the source again.
    std::filesystem::remove(source);
    const auto again = fetch(rec, cache);
    CHECK(again.local_path == fetched.local_path);

    // No stray temp files left under the cache.
    std::size_t entries = 0;
    for (const auto& e : std::filesystem::directory_iterator(cache)) {
        (void)e;
        ++entries;
    }
    CHECK(entries == 1);
}

TEST_CASE("fetch rejects corrupted bytes") {
    testutil::TempDir tmp;
    auto blob = to_bytes("firmware image body 0123456789");
    const auto good_sum = md5::hex_digest(blob);
    blob[3] ^= 0x01;  // one flipped byte
    const auto source = tmp.path() / "image.bin";
    testutil::write_file(source, blob);
    const auto rec = record_with(good_sum, "file://" + source.string());
    CHECK_THROWS_AS(fetch(rec, tmp.path() / "cache"), IntegrityError);
    CHECK_FALSE(
        std::filesystem::exists(tmp.path() / "cache" / (good_sum + ".bin")));
}

TEST_CASE("fetch refuses unsupported schemes and unreachable files") {
    testutil::TempDir tmp;
    const auto rec = record_with(fake_checksum(9), "ftp://host/fw.bin");
    CHECK_THROWS_AS(fetch(rec, tmp.path()), UnsupportedSchemeError);

    const auto missing =
        record_with(fake_checksum(8), "file:///definitely/not/here.bin");
    CHECK_THROWS_AS(fetch(missing, tmp.path()), FetchError);
}

TEST_CASE("fetch over loopback http") {
    const auto blob = to_bytes("over-the-wire firmware bytes");
    httplib::Server server;
    server.Get("/fw.bin", [&blob](const httplib::Request&, httplib::Response& res) {
        res.set_content(std::string(blob.begin(), blob.end()),
                        "application/octet-stream");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server_thread([&server]() { server.listen_after_bind(); });
    server.wait_until_ready();

    testutil::TempDir tmp;
    const auto rec = record_with(
        md5::hex_digest(blob),
        "http://127.0.0.1:" + std::to_string(port) + "/fw.bin");
    const auto fetched = fetch(rec, tmp.path() / "cache");
    REQUIRE(fetched.local_path);
    CHECK(testutil::read_file(*fetched.local_path) == blob);

    const auto missing = record_with(
        fake_checksum(7),
        "http://127.0.0.1:" + std::to_string(port) + "/nope.bin");
    CHECK_THROWS_AS(fetch(missing, tmp.path() / "cache"), FetchError);

    server.stop();
    server_thread.join();
}

TEST_CASE("concurrent fetches of one checksum serialize on the cache") {
    testutil::TempDir tmp;
    const auto blob = to_bytes("shared image payload");
    const auto source = tmp.path() / "image.bin";
    testutil::write_file(source, blob);
    const auto rec = record_with(md5::hex_digest(blob),
                                 "file://" + source.string());
    const auto cache = tmp.path() / "cache";

    std::atomic<int> failures{0};
    std::vector<std::thread> threads;
    for (int i = 0; i < 8; ++i) {
        threads.emplace_back([&]() {
            try {
                const auto got = fetch(rec, cache);
                if (testutil::read_file(*got.local_path) != blob) {
                    ++failures;
                }
            } catch (...) {
                ++failures;
            }
        });
    }
    for (auto& t : threads) {
        t.join();
    }
    CHECK(failures == 0);
    std::size_t entries = 0;
    for (const auto& e : std::filesystem::directory_iterator(cache)) {
        (void)e;
        ++entries;
    }
    CHECK(entries == 1);
}

} // TEST_SUITE
