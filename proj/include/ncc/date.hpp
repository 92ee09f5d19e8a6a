#pragma once

#include <array>
#include <charconv>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace ncc {

namespace detail {

// Howard Hinnant's civil-date algorithms (public domain).
inline constexpr int64_t days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097LL + static_cast<int64_t>(doe) - 719468;
}

struct Ymd {
  int year;
  unsigned month;
  unsigned day;
};

inline constexpr Ymd civil_from_days(int64_t z) {
  z += 719468;
  const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const int y = static_cast<int>(yoe) + static_cast<int>(era) * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  return {y + (m <= 2), m, d};
}

}  // namespace detail

// Calendar date at whole-day granularity, stored as days since 1970-01-01.
class Date {
 public:
  constexpr Date() = default;

  static constexpr bool is_leap(int y) {
    return y % 4 == 0 && (y % 100 != 0 || y % 400 == 0);
  }

  static constexpr int days_in_month(int y, int m) {
    constexpr std::array<int, 12> lengths = {31, 28, 31, 30, 31, 30,
                                             31, 31, 30, 31, 30, 31};
    if (m == 2 && is_leap(y)) return 29;
    return lengths[static_cast<size_t>(m - 1)];
  }

  static constexpr bool valid_ymd(int y, int m, int d) {
    return y >= 1 && y <= 9999 && m >= 1 && m <= 12 && d >= 1 &&
           d <= days_in_month(y, m);
  }

  static constexpr Date from_ymd(int y, int m, int d) {
    Date out;
    out.days_ = static_cast<int32_t>(detail::days_from_civil(
        y, static_cast<unsigned>(m), static_cast<unsigned>(d)));
    return out;
  }

  static constexpr Date from_days(int32_t days) {
    Date out;
    out.days_ = days;
    return out;
  }

  // Strict ISO-8601 "YYYY-MM-DD".
  static std::optional<Date> parse(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return {};
    int y = 0, m = 0, d = 0;
    auto num = [&](size_t pos, size_t len, int& out) {
      auto res = std::from_chars(text.data() + pos, text.data() + pos + len, out);
      return res.ec == std::errc{} && res.ptr == text.data() + pos + len;
    };
    if (!num(0, 4, y) || !num(5, 2, m) || !num(8, 2, d)) return {};
    if (!valid_ymd(y, m, d)) return {};
    return from_ymd(y, m, d);
  }

  constexpr int32_t days() const { return days_; }

  int year() const { return detail::civil_from_days(days_).year; }
  int month() const { return static_cast<int>(detail::civil_from_days(days_).month); }
  int day() const { return static_cast<int>(detail::civil_from_days(days_).day); }

  std::string to_string() const {
    const auto ymd = detail::civil_from_days(days_);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", ymd.year, ymd.month, ymd.day);
    return std::string(buf);
  }

  constexpr Date plus_days(int n) const { return from_days(days_ + n); }

  // Calendar-year shift; Feb 29 clamps to Feb 28 in non-leap targets.
  Date plus_years(int n) const {
    const auto ymd = detail::civil_from_days(days_);
    const int y = ymd.year + n;
    int d = static_cast<int>(ymd.day);
    const int m = static_cast<int>(ymd.month);
    if (d > days_in_month(y, m)) d = days_in_month(y, m);
    return from_ymd(y, m, d);
  }

  friend constexpr auto operator<=>(Date a, Date b) = default;
  friend constexpr int operator-(Date a, Date b) { return a.days_ - b.days_; }

 private:
  int32_t days_ = 0;
};

// Fiscal year N runs Oct 1 of N-1 through Sep 30 of N.
inline int fiscal_year(Date d) { return d.month() >= 10 ? d.year() + 1 : d.year(); }
inline Date fiscal_year_start(int fy) { return Date::from_ymd(fy - 1, 10, 1); }
inline Date fiscal_year_end(int fy) { return Date::from_ymd(fy, 9, 30); }

// Whole years elapsed from `from` to `at` (age arithmetic).
inline int years_between(Date from, Date at) {
  int years = at.year() - from.year();
  if (at.month() < from.month() ||
      (at.month() == from.month() && at.day() < from.day())) {
    --years;
  }
  return years;
}

// Half-open [start, end); a record dated exactly `end` never counts.
struct DateWindow {
  Date start;
  Date end;

  bool contains(Date d) const { return start <= d && d < end; }
  bool empty() const { return !(start < end); }
};

}  // namespace ncc
