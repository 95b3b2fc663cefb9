#pragma once

#include <chrono>
#include <compare>
#include <string>
#include <string_view>

namespace firmscan::dates {

/// Calendar date (no time-of-day component).
struct Date {
    std::chrono::year_month_day ymd{};

    auto operator<=>(const Date&) const = default;
};

/// Parses a strict ISO-8601 date "YYYY-MM-DD". Throws FormatError on
/// anything else, including syntactically valid but impossible dates.
Date parse_date(std::string_view text);

/// Like parse_date but reports failure as absence.
bool try_parse_date(std::string_view text, Date& out);

/// Formats back to "YYYY-MM-DD".
std::string format_date(const Date& d);

/// Signed day count b - a.
long days_between(const Date& a, const Date& b);

} // namespace firmscan::dates
