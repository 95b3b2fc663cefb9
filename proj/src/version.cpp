#include "firmscan/version.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <regex>

#include "firmscan/error.hpp"

namespace firmscan::version {

namespace {

// Version grammar, verbatim: major up to four digits, one or two dotted
// components of up to two digits, optional single letter, optional
// dash-introduced prerelease identifier list.
constexpr char kVersionPattern[] =
    R"((0|[1-9]\d{0,3})(?:\.\d{1,2}){1,2}([a-z])?)"
    R"((?:-((?:0|[1-9]\d*|\d*[a-zA-Z-][0-9a-zA-Z-]*)(?:\.(?:0|[1-9]\d*|\d*[a-zA-Z-][0-9a-zA-Z-]*))*))?)";

const std::regex& version_regex() {
    static const std::regex re(kVersionPattern, std::regex::ECMAScript);
    return re;
}

std::vector<std::string> split_dots(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto dot = s.find('.', start);
        if (dot == std::string_view::npos) {
            out.emplace_back(s.substr(start));
            break;
        }
        out.emplace_back(s.substr(start, dot - start));
        start = dot + 1;
    }
    return out;
}

Version from_match(const std::cmatch& m) {
    Version v;
    v.raw = m[0].str();
    const std::string letter = m[2].matched ? m[2].str() : "";
    const std::string pre = m[3].matched ? m[3].str() : "";
    // The numeric head is the full match minus letter and "-prerelease".
    std::size_t numeric_len = v.raw.size() - letter.size();
    if (!pre.empty()) {
        numeric_len -= pre.size() + 1;
    }
    for (const auto& part : split_dots(std::string_view(v.raw).substr(0, numeric_len))) {
        int value = 0;
        std::from_chars(part.data(), part.data() + part.size(), value);
        v.numeric.push_back(value);
    }
    if (!letter.empty()) {
        v.letter = letter[0];
    }
    if (!pre.empty()) {
        v.prerelease = split_dots(pre);
    }
    return v;
}

bool all_digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
        return std::isdigit(c) != 0;
    });
}

int compare_prerelease_ids(const std::string& a, const std::string& b) {
    if (all_digits(a) && all_digits(b)) {
        // The grammar forbids leading zeros, so digit-count then
        // lexicographic order is exact unbounded numeric order.
        if (a.size() != b.size()) {
            return a.size() < b.size() ? -1 : 1;
        }
    }
    return a < b ? -1 : (a > b ? 1 : 0);
}

bool contains_ci(std::string_view haystack, std::string_view needle) {
    if (needle.empty()) {
        return true;
    }
    const auto it = std::search(
        haystack.begin(), haystack.end(), needle.begin(), needle.end(),
        [](unsigned char a, unsigned char b) {
            return std::tolower(a) == std::tolower(b);
        });
    return it != haystack.end();
}

} // namespace

std::string Version::normalized() const {
    std::string out;
    for (std::size_t i = 0; i < numeric.size(); ++i) {
        if (i) {
            out.push_back('.');
        }
        out += std::to_string(numeric[i]);
    }
    if (letter) {
        out.push_back(*letter);
    }
    if (!prerelease.empty()) {
        out.push_back('-');
        for (std::size_t i = 0; i < prerelease.size(); ++i) {
            if (i) {
                out.push_back('.');
            }
            out += prerelease[i];
        }
    }
    return out;
}

bool Version::operator==(const Version& other) const {
    return numeric == other.numeric && letter == other.letter &&
           prerelease == other.prerelease && raw == other.raw;
}

std::vector<std::pair<std::size_t, std::string>>
extract_strings(std::span<const std::uint8_t> file,
                std::size_t region_limit,
                std::size_t min_len) {
    if (min_len < 1) {
        throw DomainError("min_len must be >= 1");
    }
    std::vector<std::pair<std::size_t, std::string>> out;
    const std::size_t end = std::min<std::size_t>(file.size(), region_limit);
    std::size_t run_start = 0;
    std::string run;
    for (std::size_t i = 0; i <= end; ++i) {
        const bool printable = i < end && file[i] >= 0x20 && file[i] <= 0x7e;
        if (printable) {
            if (run.empty()) {
                run_start = i;
            }
            run.push_back(static_cast<char>(file[i]));
        } else if (!run.empty()) {
            if (run.size() >= min_len) {
                out.emplace_back(run_start, run);
            }
            run.clear();
        }
    }
    return out;
}

std::optional<Version> parse_version(std::string_view s) {
    std::cmatch m;
    if (!std::regex_search(s.data(), s.data() + s.size(), m, version_regex())) {
        return std::nullopt;
    }
    return from_match(m);
}

std::optional<Version> parse_version_exact(std::string_view s) {
    std::cmatch m;
    if (!std::regex_match(s.data(), s.data() + s.size(), m, version_regex())) {
        return std::nullopt;
    }
    return from_match(m);
}

Ordering compare(const Version& a, const Version& b) {
    for (std::size_t i = 0; i < 3; ++i) {
        const int na = i < a.numeric.size() ? a.numeric[i] : 0;
        const int nb = i < b.numeric.size() ? b.numeric[i] : 0;
        if (na != nb) {
            return na < nb ? Ordering::less : Ordering::greater;
        }
    }
    const int la = a.letter ? 1 + (*a.letter - 'a') : 0;
    const int lb = b.letter ? 1 + (*b.letter - 'a') : 0;
    if (la != lb) {
        return la < lb ? Ordering::less : Ordering::greater;
    }
    // Prerelease precedes release.
    if (a.prerelease.empty() != b.prerelease.empty()) {
        return a.prerelease.empty() ? Ordering::greater : Ordering::less;
    }
    const std::size_t n = std::min(a.prerelease.size(), b.prerelease.size());
    for (std::size_t i = 0; i < n; ++i) {
        const int c = compare_prerelease_ids(a.prerelease[i], b.prerelease[i]);
        if (c != 0) {
            return c < 0 ? Ordering::less : Ordering::greater;
        }
    }
    if (a.prerelease.size() != b.prerelease.size()) {
        return a.prerelease.size() < b.prerelease.size() ? Ordering::less
                                                         : Ordering::greater;
    }
    return Ordering::equal;
}

bool satisfies(const Version& v, const VersionConstraint& c) {
    const Ordering ord = compare(v, c.bound);
    switch (c.op) {
    case Op::eq:
        return ord == Ordering::equal;
    case Op::ge:
        return ord != Ordering::less;
    case Op::le:
        return ord != Ordering::greater;
    case Op::tilde: {
        if (ord == Ordering::less) {
            return false;
        }
        Version upper;
        upper.numeric = {c.bound.major(), c.bound.minor() + 1, 0};
        return compare(v, upper) == Ordering::less;
    }
    case Op::caret: {
        if (ord == Ordering::less) {
            return false;
        }
        Version upper;
        upper.numeric = {c.bound.major() + 1, 0, 0};
        return compare(v, upper) == Ordering::less;
    }
    }
    return false;
}

std::optional<VersionEvidence>
extract_library_version(std::span<const std::uint8_t> file,
                        std::string_view term,
                        std::size_t region_limit,
                        std::size_t min_len) {
    const auto strings = extract_strings(file, region_limit, min_len);
    std::optional<VersionEvidence> fallback;
    for (const auto& [offset, text] : strings) {
        auto v = parse_version(text);
        if (!v) {
            continue;
        }
        if (!term.empty() && contains_ci(text, term)) {
            return VersionEvidence{std::move(*v), text, offset};
        }
        if (!fallback) {
            fallback = VersionEvidence{std::move(*v), text, offset};
        }
    }
    return fallback;
}

} // namespace firmscan::version
