#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace labelstrat {

inline constexpr std::int64_t kMinuteMs = 60'000;
inline constexpr std::int64_t kDayMs = 86'400'000;
inline constexpr std::int64_t kMinutesPerDay = 1440;

/// Floors a UTC millisecond timestamp to the start of its minute.
constexpr std::int64_t floor_to_minute(std::int64_t timestamp_ms) {
  const std::int64_t q = timestamp_ms / kMinuteMs;
  const std::int64_t r = timestamp_ms % kMinuteMs;
  return (r < 0 ? q - 1 : q) * kMinuteMs;
}

/// Days since 1970-01-01 for an ISO-8601 calendar date (YYYY-MM-DD).
/// Throws ValidationError on malformed input.
std::int64_t parse_iso_date(std::string_view text);

std::string format_iso_date(std::int64_t day_number);

/// Millisecond timestamp of 00:00 UTC on the given day.
constexpr std::int64_t day_start_ms(std::int64_t day_number) { return day_number * kDayMs; }

}  // namespace labelstrat
