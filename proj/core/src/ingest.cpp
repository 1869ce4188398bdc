#include "labelstrat/ingest.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>
#include <fmt/os.h>

#include "csv_util.hpp"
#include "labelstrat/error.hpp"
#include "labelstrat/time.hpp"

namespace labelstrat {

namespace {

void validate_ticks(std::span<const Tick> ticks) {
  if (ticks.empty()) throw IngestError("no ticks to aggregate", 0);
  for (std::size_t i = 0; i < ticks.size(); ++i) {
    const Tick& t = ticks[i];
    if (!(t.price > 0.0) || !(t.quantity > 0.0)) {
      throw IngestError(
          fmt::format("tick {} has non-positive price or quantity ({}, {})", i, t.price, t.quantity),
          i);
    }
    if (i > 0 && t.timestamp_ms < ticks[i - 1].timestamp_ms) {
      throw IngestError(fmt::format("tick {} is earlier than its predecessor ({} < {})", i,
                                    t.timestamp_ms, ticks[i - 1].timestamp_ms),
                        i);
    }
  }
}

Bar synthetic_bar(std::int64_t open_time, double price) {
  return Bar{open_time, price, price, price, price, 0.0, price, true};
}

}  // namespace

std::vector<Bar> aggregate_ticks(std::span<const Tick> ticks) {
  validate_ticks(ticks);
  std::vector<Bar> bars;
  const std::int64_t first = floor_to_minute(ticks.front().timestamp_ms);
  const std::int64_t last = floor_to_minute(ticks.back().timestamp_ms);
  bars.reserve(static_cast<std::size_t>((last - first) / kMinuteMs + 1));

  std::size_t i = 0;
  while (i < ticks.size()) {
    const std::int64_t minute = floor_to_minute(ticks[i].timestamp_ms);
    if (!bars.empty()) {
      const double prev_close = bars.back().close;
      for (std::int64_t t = bars.back().open_time + kMinuteMs; t < minute; t += kMinuteMs) {
        bars.push_back(synthetic_bar(t, prev_close));
      }
    }
    Bar bar;
    bar.open_time = minute;
    bar.open = bar.high = bar.low = bar.close = ticks[i].price;
    double notional = 0.0;
    for (; i < ticks.size() && floor_to_minute(ticks[i].timestamp_ms) == minute; ++i) {
      const Tick& t = ticks[i];
      bar.high = std::max(bar.high, t.price);
      bar.low = std::min(bar.low, t.price);
      bar.close = t.price;
      bar.volume += t.quantity;
      notional += t.price * t.quantity;
    }
    // Rounding can push the weighted mean an ulp outside the range.
    bar.vwap = std::clamp(notional / bar.volume, bar.low, bar.high);
    bars.push_back(bar);
  }
  return bars;
}

std::vector<Tick> read_ticks_csv(const std::filesystem::path& path) {
  const std::string text = detail::slurp(path);
  const auto lines = detail::lines_of(text);
  std::vector<Tick> ticks;
  ticks.reserve(lines.size());
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const auto fields = detail::split_fields(lines[n]);
    if (n == 0 && !detail::looks_numeric(fields.front())) continue;  // header
    if (fields.size() < 3) {
      throw ValidationError(fmt::format("{}:{}: expected timestamp_ms,price,quantity",
                                        path.string(), n + 1));
    }
    ticks.push_back(Tick{detail::parse_number<std::int64_t>(fields[0], n + 1, path),
                         detail::parse_number<double>(fields[1], n + 1, path),
                         detail::parse_number<double>(fields[2], n + 1, path)});
  }
  return ticks;
}

void write_ticks_csv(const std::filesystem::path& path, std::span<const Tick> ticks) {
  auto out = fmt::output_file(path.string());
  out.print("timestamp_ms,price,quantity\n");
  for (const Tick& t : ticks) out.print("{},{},{}\n", t.timestamp_ms, t.price, t.quantity);
}

std::vector<Bar> read_bars_csv(const std::filesystem::path& path) {
  const std::string text = detail::slurp(path);
  const auto lines = detail::lines_of(text);
  std::vector<Bar> bars;
  bars.reserve(lines.size());
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const auto f = detail::split_fields(lines[n]);
    if (n == 0 && !detail::looks_numeric(f.front())) continue;
    if (f.size() < 8) {
      throw ValidationError(fmt::format(
          "{}:{}: expected open_time,open,high,low,close,volume,vwap,synthetic", path.string(),
          n + 1));
    }
    Bar b;
    b.open_time = detail::parse_number<std::int64_t>(f[0], n + 1, path);
    b.open = detail::parse_number<double>(f[1], n + 1, path);
    b.high = detail::parse_number<double>(f[2], n + 1, path);
    b.low = detail::parse_number<double>(f[3], n + 1, path);
    b.close = detail::parse_number<double>(f[4], n + 1, path);
    b.volume = detail::parse_number<double>(f[5], n + 1, path);
    b.vwap = detail::parse_number<double>(f[6], n + 1, path);
    b.synthetic = detail::parse_number<int>(f[7], n + 1, path) != 0;
    bars.push_back(b);
  }
  return bars;
}

void write_bars_csv(const std::filesystem::path& path, std::span<const Bar> bars) {
  auto out = fmt::output_file(path.string());
  out.print("open_time,open,high,low,close,volume,vwap,synthetic\n");
  for (const Bar& b : bars) {
    out.print("{},{},{},{},{},{},{},{}\n", b.open_time, b.open, b.high, b.low, b.close, b.volume,
              b.vwap, b.synthetic ? 1 : 0);
  }
}

DatasetSplit split_datasets(std::span<const Bar> bars, const SplitConfig& config) {
  const std::array<std::pair<const char*, DateWindow>, 3> windows{
      {{"train", config.train}, {"past", config.past}, {"future", config.future}}};
  if (config.min_gap_days < 1) {
    throw ValidationError("minimum gap between datasets must be at least one day");
  }
  for (const auto& [name, w] : windows) {
    if (w.last_day < w.first_day) {
      throw ValidationError(fmt::format("{} window is empty ({} after {})", name,
                                        format_iso_date(w.first_day), format_iso_date(w.last_day)));
    }
  }
  DatasetSplit split;
  for (std::size_t k = 0; k + 1 < windows.size(); ++k) {
    const auto& [name_a, a] = windows[k];
    const auto& [name_b, b] = windows[k + 1];
    const std::int64_t gap = b.first_day - a.last_day;
    if (gap < config.min_gap_days) {
      throw ValidationError(fmt::format(
          "{} and {} windows overlap or are too close (gap {} days, minimum {})", name_a, name_b,
          gap, config.min_gap_days));
    }
    split.gap_days[k] = gap;
  }
  if (bars.empty()) throw ValidationError("no bars to split");

  auto locate = [&](const char* name, const DateWindow& w) {
    const std::int64_t begin_ms = day_start_ms(w.first_day);
    const std::int64_t end_ms = day_start_ms(w.last_day + 1);
    if (bars.front().open_time > begin_ms || bars.back().open_time < end_ms - kMinuteMs) {
      throw ValidationError(fmt::format("bars do not cover the {} window {}..{}", name,
                                        format_iso_date(w.first_day), format_iso_date(w.last_day)));
    }
    const auto by_time = [](const Bar& bar, std::int64_t t) { return bar.open_time < t; };
    const auto lo = std::lower_bound(bars.begin(), bars.end(), begin_ms, by_time);
    const auto hi = std::lower_bound(bars.begin(), bars.end(), end_ms, by_time);
    IndexRange range{static_cast<std::size_t>(lo - bars.begin()),
                     static_cast<std::size_t>(hi - bars.begin())};
    if (range.empty()) throw ValidationError(fmt::format("{} window contains no bars", name));
    return range;
  };
  split.train = locate("train", config.train);
  split.past = locate("past", config.past);
  split.future = locate("future", config.future);
  return split;
}

}  // namespace labelstrat
