#pragma once

#include <charconv>
#include <chrono>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace r0panel {

using Date = std::chrono::sys_days;

namespace detail {

inline std::optional<int> parse_int(std::string_view s) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<Date> make_date(int y, int m, int d) {
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{unsigned(m)},
                                  std::chrono::day{unsigned(d)}};
  if (!ymd.ok()) return std::nullopt;
  return Date{ymd};
}

} // namespace detail

/// Accepts YYYY-MM-DD, YYYYMMDD (OxCGRT) and MM/DD/YYYY (CDC exports, optional time suffix).
inline std::optional<Date> parse_date(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '"')) s.remove_suffix(1);
  if (auto sp = s.find(' '); sp != std::string_view::npos) s = s.substr(0, sp);
  if (s.size() == 10 && s[4] == '-' && s[7] == '-') {
    auto y = detail::parse_int(s.substr(0, 4)), m = detail::parse_int(s.substr(5, 2)),
         d = detail::parse_int(s.substr(8, 2));
    if (y && m && d) return detail::make_date(*y, *m, *d);
    return std::nullopt;
  }
  if (s.size() == 8 && s.find_first_not_of("0123456789") == std::string_view::npos) {
    auto y = detail::parse_int(s.substr(0, 4)), m = detail::parse_int(s.substr(4, 2)),
         d = detail::parse_int(s.substr(6, 2));
    if (y && m && d) return detail::make_date(*y, *m, *d);
    return std::nullopt;
  }
  if (s.size() == 10 && s[2] == '/' && s[5] == '/') {
    auto m = detail::parse_int(s.substr(0, 2)), d = detail::parse_int(s.substr(3, 2)),
         y = detail::parse_int(s.substr(6, 4));
    if (y && m && d) return detail::make_date(*y, *m, *d);
  }
  return std::nullopt;
}

inline std::string format_date(Date d) {
  std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(ymd.year()), unsigned(ymd.month()),
                unsigned(ymd.day()));
  return buf;
}

inline long days_between(Date from, Date to) { return (to - from).count(); }

inline Date add_days(Date d, long n) { return d + std::chrono::days{n}; }

} // namespace r0panel
