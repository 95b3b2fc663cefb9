#include "firmscan/dates.hpp"

#include <cctype>
#include <cstdio>

#include "firmscan/error.hpp"

namespace firmscan::dates {

bool try_parse_date(std::string_view text, Date& out) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        return false;
    }
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
        if (!std::isdigit(static_cast<unsigned char>(text[i]))) {
            return false;
        }
    }
    const int y = (text[0] - '0') * 1000 + (text[1] - '0') * 100 +
                  (text[2] - '0') * 10 + (text[3] - '0');
    const int m = (text[5] - '0') * 10 + (text[6] - '0');
    const int d = (text[8] - '0') * 10 + (text[9] - '0');
    const std::chrono::year_month_day ymd{std::chrono::year{y},
                                          std::chrono::month{static_cast<unsigned>(m)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) {
        return false;
    }
    out = Date{ymd};
    return true;
}

Date parse_date(std::string_view text) {
    Date d;
    if (!try_parse_date(text, d)) {
        throw FormatError("not an ISO-8601 date: '" + std::string(text) + "'");
    }
    return d;
}

std::string format_date(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u",
                  static_cast<int>(d.ymd.year()),
                  static_cast<unsigned>(d.ymd.month()),
                  static_cast<unsigned>(d.ymd.day()));
    return buf;
}

long days_between(const Date& a, const Date& b) {
    const auto da = std::chrono::sys_days{a.ymd};
    const auto db = std::chrono::sys_days{b.ymd};
    return (db - da).count();
}

} // namespace firmscan::dates
