#include <doctest.h>

#include <algorithm>
#include <array>
#include <random>

#include "firmscan/error.hpp"
#include "firmscan/version.hpp"
#include "test_util.hpp"

using namespace firmscan::version;
using testutil::to_bytes;

namespace {

Version make(std::vector<int> numeric, std::optional<char> letter = {},
             std::vector<std::string> prerelease = {}) {
    Version v;
    v.numeric = std::move(numeric);
    v.letter = letter;
    v.prerelease = std::move(prerelease);
    v.raw = v.normalized();
    return v;
}

// Independent ordering oracle: pad to an integer tuple. Prerelease
// identifiers here are numeric-only; -1 pads missing ids so a shorter list
// sorts first, and the has-no-prerelease flag sorts releases after.
std::array<long long, 8> padded_tuple(const Version& v) {
    std::array<long long, 8> key{};
    key[0] = v.major();
    key[1] = v.minor();
    key[2] = v.patch();
    key[3] = v.letter ? 1 + (*v.letter - 'a') : 0;
    key[4] = v.prerelease.empty() ? 1 : 0;
    for (std::size_t i = 0; i < 3; ++i) {
        key[5 + i] = i < v.prerelease.size() ? std::stoll(v.prerelease[i]) : -1;
    }
    return key;
}

Version random_version(std::mt19937& rng, bool numeric_prerelease_only) {
    std::uniform_int_distribution<int> major(0, 9999);
    std::uniform_int_distribution<int> two(0, 99);
    std::uniform_int_distribution<int> coin(0, 1);
    std::uniform_int_distribution<int> letter('a', 'z');
    std::vector<int> numeric{major(rng), two(rng)};
    if (coin(rng)) {
        numeric.push_back(two(rng));
    }
    std::optional<char> suffix;
    if (coin(rng) == 0 && coin(rng) == 0) {
        suffix = static_cast<char>(letter(rng));
    }
    std::vector<std::string> prerelease;
    if (coin(rng) == 0 && coin(rng) == 0) {
        std::uniform_int_distribution<int> count(1, 3);
        std::uniform_int_distribution<int> id(0, 9999);
        const int n = count(rng);
        for (int i = 0; i < n; ++i) {
            if (numeric_prerelease_only || coin(rng)) {
                prerelease.push_back(std::to_string(id(rng)));
            } else {
                prerelease.push_back("rc" + std::to_string(id(rng) % 10));
            }
        }
    }
    return make(std::move(numeric), suffix, std::move(prerelease));
}

} // namespace

TEST_SUITE("version") {

TEST_CASE("grammar accepts the documented shapes") {
    auto v = parse_version("v1.36.0");
    REQUIRE(v);
    CHECK(v->numeric == std::vector<int>{1, 36, 0});
    CHECK(v->raw == "1.36.0");

    v = parse_version("dnsmasq-2.33");
    REQUIRE(v);
    CHECK(v->numeric == std::vector<int>{2, 33});

    v = parse_version("BusyBox v1.13.4");
    REQUIRE(v);
    CHECK(v->numeric == std::vector<int>{1, 13, 4});

    v = parse_version("2011.54");
    REQUIRE(v);
    CHECK(v->numeric == std::vector<int>{2011, 54});

    v = parse_version("1.0.0-rc1");
    REQUIRE(v);
    CHECK(v->numeric == std::vector<int>{1, 0, 0});
    CHECK(v->prerelease == std::vector<std::string>{"rc1"});

    v = parse_version("1.4.4a");
    REQUIRE(v);
    CHECK(v->letter == 'a');
}

TEST_CASE("grammar rejects non-versions") {
    CHECK_FALSE(parse_version("no digits here"));
    // A bare year has no dotted component.
    CHECK_FALSE(parse_version("2009"));
    CHECK_FALSE(parse_version("1."));
    CHECK_FALSE(parse_version(""));
}

TEST_CASE("exact parse refuses trailing residue") {
    CHECK(parse_version_exact("1.21.1"));
    CHECK(parse_version_exact("2011.54"));
    // A three-digit patch would silently truncate under search semantics.
    CHECK_FALSE(parse_version_exact("1.4.100"));
    CHECK_FALSE(parse_version_exact("v1.2.3"));
    CHECK(parse_version("1.4.100"));  // search still finds "1.4.10"
}

TEST_CASE("parse of normalized form is identity") {
    std::mt19937 rng(7);
    for (int i = 0; i < 500; ++i) {
        const Version v = random_version(rng, false);
        const auto reparsed = parse_version(v.normalized());
        REQUIRE(reparsed);
        CHECK(reparsed->numeric == v.numeric);
        CHECK(reparsed->letter == v.letter);
        CHECK(reparsed->prerelease == v.prerelease);
    }
}

TEST_CASE("raw reparses to an equal version") {
    for (const char* s : {"iptables v1.4.21", "x 2.33 y", "1.0.0-alpha.7"}) {
        const auto v = parse_version(s);
        REQUIRE(v);
        const auto again = parse_version(v->raw);
        REQUIRE(again);
        CHECK(*again == *v);
    }
}

TEST_CASE("compare follows the documented examples") {
    const auto less = Ordering::less;
    const auto equal = Ordering::equal;
    // Numeric, not lexicographic.
    CHECK(compare(make({1, 9, 2}), make({1, 36, 0})) == less);
    // Missing patch compares as zero.
    CHECK(compare(make({2, 33}), make({2, 33, 0})) == equal);
    // Prerelease precedes release.
    CHECK(compare(make({1, 0, 0}, {}, {"rc1"}), make({1, 0, 0})) == less);
    // Letter suffix: absent < 'a' < 'b'.
    CHECK(compare(make({1, 4, 4}), make({1, 4, 4}, 'a')) == less);
    CHECK(compare(make({1, 4, 4}, 'a'), make({1, 4, 4}, 'b')) == less);
    // Numeric prerelease ids compare as integers.
    CHECK(compare(make({1, 0, 0}, {}, {"2"}), make({1, 0, 0}, {}, {"10"})) == less);
    // Mixed ids compare lexicographically.
    CHECK(compare(make({1, 0, 0}, {}, {"2"}), make({1, 0, 0}, {}, {"alpha"})) == less);
    // Equal prefix, shorter first.
    CHECK(compare(make({1, 0, 0}, {}, {"rc"}), make({1, 0, 0}, {}, {"rc", "1"})) == less);
}

TEST_CASE("sorting matches the padded-tuple oracle") {
    std::mt19937 rng(1234);
    std::vector<Version> versions;
    for (int i = 0; i < 1000; ++i) {
        versions.push_back(random_version(rng, /*numeric_prerelease_only=*/true));
    }
    auto by_compare = versions;
    std::stable_sort(by_compare.begin(), by_compare.end(),
                     [](const Version& a, const Version& b) {
                         return compare(a, b) == Ordering::less;
                     });
    auto by_oracle = versions;
    std::stable_sort(by_oracle.begin(), by_oracle.end(),
                     [](const Version& a, const Version& b) {
                         return padded_tuple(a) < padded_tuple(b);
                     });
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < versions.size(); ++i) {
        if (padded_tuple(by_compare[i]) != padded_tuple(by_oracle[i])) {
            ++mismatches;
        }
    }
    CHECK(mismatches == 0);
}

TEST_CASE("compare is a total order") {
    std::mt19937 rng(99);
    std::vector<Version> pool;
    for (int i = 0; i < 60; ++i) {
        pool.push_back(random_version(rng, false));
    }
    for (const auto& a : pool) {
        CHECK(compare(a, a) == Ordering::equal);
        for (const auto& b : pool) {
            const auto ab = compare(a, b);
            const auto ba = compare(b, a);
            if (ab == Ordering::less) CHECK(ba == Ordering::greater);
            if (ab == Ordering::greater) CHECK(ba == Ordering::less);
            if (ab == Ordering::equal) CHECK(ba == Ordering::equal);
            for (const auto& c : pool) {
                if (ab == Ordering::less &&
                    compare(b, c) == Ordering::less) {
                    CHECK(compare(a, c) == Ordering::less);
                }
            }
        }
    }
}

TEST_CASE("satisfies implements the five operators") {
    const auto bound = make({1, 4, 4});
    CHECK(satisfies(make({4, 0}), {Op::eq, make({4, 0})}));
    CHECK(satisfies(make({1, 4, 5}), {Op::tilde, bound}));
    CHECK_FALSE(satisfies(make({1, 5, 0}), {Op::tilde, bound}));
    CHECK(satisfies(make({1, 9, 0}), {Op::caret, bound}));
    CHECK_FALSE(satisfies(make({2, 0, 0}), {Op::caret, bound}));
    CHECK(satisfies(make({1, 4, 4}), {Op::ge, bound}));
    CHECK(satisfies(make({1, 4, 4}), {Op::le, bound}));
    CHECK_FALSE(satisfies(make({1, 4, 3}), {Op::ge, bound}));
    CHECK_FALSE(satisfies(make({1, 4, 5}), {Op::le, bound}));
}

TEST_CASE("satisfies(v, eq v) holds and intervals are convex") {
    std::mt19937 rng(5);
    for (int i = 0; i < 200; ++i) {
        const Version v = random_version(rng, true);
        CHECK(satisfies(v, {Op::eq, v}));
    }
    for (int i = 0; i < 200; ++i) {
        std::vector<Version> triple{random_version(rng, true),
                                    random_version(rng, true),
                                    random_version(rng, true)};
        std::sort(triple.begin(), triple.end(),
                  [](const Version& a, const Version& b) {
                      return compare(a, b) == Ordering::less;
                  });
        const Version bound = random_version(rng, true);
        for (const Op op : {Op::tilde, Op::caret}) {
            const VersionConstraint c{op, bound};
            if (satisfies(triple[0], c) && satisfies(triple[2], c)) {
                CHECK(satisfies(triple[1], c));
            }
        }
    }
}

TEST_CASE("extract_strings finds printable runs") {
    const auto one = to_bytes(std::string("BusyBox v1.13.4") + '\0');
    const auto got = extract_strings(one);
    REQUIRE(got.size() == 1);
    CHECK(got[0].first == 0);
    CHECK(got[0].second == "BusyBox v1.13.4");

    const auto two = to_bytes(std::string("ab") + '\0' + "cdef" + '\0');
    const auto filtered = extract_strings(two, 1 << 20, 4);
    REQUIRE(filtered.size() == 1);
    CHECK(filtered[0].first == 3);
    CHECK(filtered[0].second == "cdef");

    testutil::Bytes high(1024, 0x80);
    CHECK(extract_strings(high).empty());
}

TEST_CASE("extract_strings output is printable and respects the region") {
    std::mt19937 rng(321);
    testutil::Bytes noise(4096);
    for (auto& b : noise) {
        b = static_cast<std::uint8_t>(rng() & 0xff);
    }
    for (const auto& [offset, text] : extract_strings(noise, 2048, 4)) {
        CHECK(offset < 2048);
        for (unsigned char c : text) {
            CHECK(c >= 0x20);
            CHECK(c <= 0x7e);
        }
    }
    CHECK_THROWS_AS(extract_strings(noise, 4096, 0), firmscan::DomainError);
}

TEST_CASE("extract_library_version prefers the term-bearing string") {
    // A bare year is not a version, so the iptables line wins even though
    // the copyright line comes first.
    std::string blob;
    blob += "Copyright 2009";
    blob += '\0';
    blob += "iptables 1.4.4";
    blob += '\0';
    const auto evidence = extract_library_version(to_bytes(blob), "iptables");
    REQUIRE(evidence);
    CHECK(evidence->version.numeric == std::vector<int>{1, 4, 4});
    CHECK(evidence->source_string == "iptables 1.4.4");

    // Term preference beats byte order.
    std::string two;
    two += "libfoo 9.9.9";
    two += '\0';
    two += "BusyBox v1.21.1 (2013-07-13)";
    two += '\0';
    const auto busybox = extract_library_version(to_bytes(two), "busybox");
    REQUIRE(busybox);
    CHECK(busybox->version.numeric == std::vector<int>{1, 21, 1});

    // Fallback: first parseable version when no term-bearing string exists.
    const auto fallback = extract_library_version(to_bytes(two), "dnsmasq");
    REQUIRE(fallback);
    CHECK(fallback->version.numeric == std::vector<int>{9, 9, 9});

    testutil::Bytes stripped(256, 0x00);
    CHECK_FALSE(extract_library_version(stripped, "busybox"));
}

TEST_CASE("evidence source string contains the raw version") {
    std::string blob = "dropbear_2011.54 release";
    const auto evidence = extract_library_version(to_bytes(blob), "dropbear");
    REQUIRE(evidence);
    CHECK(evidence->source_string.find(evidence->version.raw) !=
          std::string::npos);
    CHECK(evidence->byte_offset == 0);
}

} // TEST_SUITE
