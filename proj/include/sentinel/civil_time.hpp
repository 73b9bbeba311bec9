#ifndef SENTINEL_CIVIL_TIME_HPP
#define SENTINEL_CIVIL_TIME_HPP

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace sentinel {

/// Proleptic Gregorian calendar date with no timezone attached.
struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  auto operator<=>(const Date &) const = default;

  /// Days since 1970-01-01.
  std::int64_t to_days() const;
  static Date from_days(std::int64_t days);

  /// 0 = Monday ... 6 = Sunday.
  int weekday() const;
  Date week_start() const { return from_days(to_days() - weekday()); }
  Date plus_days(std::int64_t n) const { return from_days(to_days() + n); }

  /// YYYY-MM-DD
  std::string iso() const;
  /// Strict YYYY-MM-DD; rejects impossible calendar dates.
  static std::optional<Date> parse(std::string_view text);
};

bool is_leap_year(int year);
int days_in_month(int year, int month);

/// Naive local timestamp at minute resolution.
struct Timestamp {
  Date date;
  int minute_of_day = 0;

  auto operator<=>(const Timestamp &) const = default;

  /// HH:MM, 24-hour.
  std::string time_text() const;
  /// YYYY-MM-DD HH:MM
  std::string iso() const;
  /// Strict HH:MM returning minutes since midnight.
  static std::optional<int> parse_time(std::string_view text);
};

} // namespace sentinel

#endif // SENTINEL_CIVIL_TIME_HPP
