#include "labelstrat/time.hpp"

#include <charconv>
#include <chrono>

#include <fmt/format.h>

#include "labelstrat/error.hpp"

namespace labelstrat {

namespace {

int parse_field(std::string_view text, std::string_view whole) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ValidationError(fmt::format("invalid ISO-8601 date '{}'", whole));
  }
  return value;
}

}  // namespace

std::int64_t parse_iso_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw ValidationError(fmt::format("invalid ISO-8601 date '{}' (expected YYYY-MM-DD)", text));
  }
  const std::chrono::year_month_day ymd{std::chrono::year{parse_field(text.substr(0, 4), text)},
                                        std::chrono::month{static_cast<unsigned>(
                                            parse_field(text.substr(5, 2), text))},
                                        std::chrono::day{static_cast<unsigned>(
                                            parse_field(text.substr(8, 2), text))}};
  if (!ymd.ok()) throw ValidationError(fmt::format("invalid calendar date '{}'", text));
  return std::chrono::sys_days{ymd}.time_since_epoch().count();
}

std::string format_iso_date(std::int64_t day_number) {
  const std::chrono::year_month_day ymd{
      std::chrono::sys_days{std::chrono::days{day_number}}};
  return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
}

}  // namespace labelstrat
