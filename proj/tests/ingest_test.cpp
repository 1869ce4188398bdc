#include <gtest/gtest.h>

#include <fstream>
#include <numeric>

#include "labelstrat/error.hpp"
#include "labelstrat/ingest.hpp"
#include "labelstrat/synth.hpp"
#include "labelstrat/time.hpp"
#include "support.hpp"

using namespace labelstrat;
using labelstrat::testing::kT0;

TEST(Aggregate, SingleTickMakesFlatBar) {
  const std::vector<Tick> ticks{{kT0 + 1234, 100.0, 2.0}};
  const auto bars = aggregate_ticks(ticks);
  ASSERT_EQ(bars.size(), 1u);
  const Bar& b = bars[0];
  EXPECT_EQ(b.open_time, kT0);
  EXPECT_EQ(b.open, 100.0);
  EXPECT_EQ(b.high, 100.0);
  EXPECT_EQ(b.low, 100.0);
  EXPECT_EQ(b.close, 100.0);
  EXPECT_EQ(b.volume, 2.0);
  EXPECT_EQ(b.vwap, 100.0);
  EXPECT_FALSE(b.synthetic);
}

TEST(Aggregate, VolumeWeightedPriceWithinMinute) {
  const std::vector<Tick> ticks{{kT0, 100.0, 1.0}, {kT0 + 59'999, 200.0, 3.0}};
  const auto bars = aggregate_ticks(ticks);
  ASSERT_EQ(bars.size(), 1u);
  EXPECT_DOUBLE_EQ(bars[0].vwap, 175.0);
  EXPECT_EQ(bars[0].open, 100.0);
  EXPECT_EQ(bars[0].close, 200.0);
  EXPECT_EQ(bars[0].high, 200.0);
  EXPECT_EQ(bars[0].low, 100.0);
  EXPECT_EQ(bars[0].volume, 4.0);
}

TEST(Aggregate, EmptyMinuteIsForwardFilled) {
  const std::vector<Tick> ticks{{kT0, 100.0, 1.0}, {kT0 + 10, 101.0, 1.0},
                                {kT0 + 2 * kMinuteMs, 105.0, 1.0}};
  const auto bars = aggregate_ticks(ticks);
  ASSERT_EQ(bars.size(), 3u);
  const Bar& gap = bars[1];
  EXPECT_TRUE(gap.synthetic);
  EXPECT_EQ(gap.open_time, kT0 + kMinuteMs);
  EXPECT_EQ(gap.volume, 0.0);
  for (double p : {gap.open, gap.high, gap.low, gap.close}) EXPECT_EQ(p, 101.0);
  EXPECT_FALSE(bars[2].synthetic);
}

TEST(Aggregate, MinuteBoundaryTickBelongsToItsMinute) {
  const std::vector<Tick> ticks{{kT0 + kMinuteMs - 1, 100.0, 1.0}, {kT0 + kMinuteMs, 110.0, 1.0}};
  const auto bars = aggregate_ticks(ticks);
  ASSERT_EQ(bars.size(), 2u);
  EXPECT_EQ(bars[1].open_time, kT0 + kMinuteMs);
  EXPECT_EQ(bars[1].open, 110.0);
}

TEST(Aggregate, RejectsUnsortedWithIndex) {
  const std::vector<Tick> ticks{{kT0, 1.0, 1.0}, {kT0 + 5, 1.0, 1.0}, {kT0 + 4, 1.0, 1.0}};
  try {
    aggregate_ticks(ticks);
    FAIL() << "expected IngestError";
  } catch (const IngestError& e) {
    EXPECT_EQ(e.index(), 2u);
  }
}

TEST(Aggregate, RejectsNonPositiveValues) {
  EXPECT_THROW(aggregate_ticks(std::vector<Tick>{{kT0, 0.0, 1.0}}), IngestError);
  EXPECT_THROW(aggregate_ticks(std::vector<Tick>{{kT0, 1.0, -1.0}}), IngestError);
  EXPECT_THROW(aggregate_ticks(std::vector<Tick>{}), std::exception);
}

TEST(Aggregate, ConservesVolumeAndKeepsVwapInRange) {
  SynthConfig cfg;
  cfg.days = 2;
  cfg.seed = 5;
  const auto ticks = generate_ticks(cfg);
  const auto bars = aggregate_ticks(ticks);
  double tick_volume = 0.0, bar_volume = 0.0;
  for (const auto& t : ticks) tick_volume += t.quantity;
  for (const auto& b : bars) {
    bar_volume += b.volume;
    EXPECT_LE(b.low, std::min(b.open, b.close));
    EXPECT_GE(b.high, std::max(b.open, b.close));
    if (!b.synthetic) {
      EXPECT_GE(b.vwap, b.low);
      EXPECT_LE(b.vwap, b.high);
    }
  }
  EXPECT_NEAR(bar_volume, tick_volume, 1e-9 * tick_volume);
}

TEST(Aggregate, ConcatenationCommutesAtMinuteBoundary) {
  SynthConfig cfg;
  cfg.days = 1;
  cfg.seed = 9;
  const auto ticks = generate_ticks(cfg);
  // Cut where both neighbouring minutes traded so no gap bar spans the boundary.
  std::size_t cut = ticks.size() / 2;
  while (floor_to_minute(ticks[cut].timestamp_ms) == floor_to_minute(ticks[cut - 1].timestamp_ms) ||
         floor_to_minute(ticks[cut].timestamp_ms) != floor_to_minute(ticks[cut - 1].timestamp_ms) + kMinuteMs) {
    ++cut;
  }
  const std::vector<Tick> head(ticks.begin(), ticks.begin() + static_cast<std::ptrdiff_t>(cut));
  const std::vector<Tick> tail(ticks.begin() + static_cast<std::ptrdiff_t>(cut), ticks.end());
  auto joined = aggregate_ticks(head);
  const auto rest = aggregate_ticks(tail);
  joined.insert(joined.end(), rest.begin(), rest.end());
  const auto whole = aggregate_ticks(ticks);
  ASSERT_EQ(joined.size(), whole.size());
  for (std::size_t i = 0; i < whole.size(); ++i) {
    EXPECT_EQ(joined[i].open_time, whole[i].open_time);
    EXPECT_EQ(joined[i].open, whole[i].open);
    EXPECT_EQ(joined[i].close, whole[i].close);
    EXPECT_EQ(joined[i].vwap, whole[i].vwap);
    EXPECT_EQ(joined[i].volume, whole[i].volume);
  }
}

TEST(BarsCsv, RoundTrips) {
  labelstrat::testing::TempDir dir("bars_csv");
  const auto bars = labelstrat::testing::random_walk_bars(50, 3);
  write_bars_csv(dir / "bars.csv", bars);
  const auto back = read_bars_csv(dir / "bars.csv");
  ASSERT_EQ(back.size(), bars.size());
  for (std::size_t i = 0; i < bars.size(); ++i) {
    EXPECT_EQ(back[i].open_time, bars[i].open_time);
    EXPECT_EQ(back[i].vwap, bars[i].vwap);
    EXPECT_EQ(back[i].high, bars[i].high);
    EXPECT_EQ(back[i].synthetic, bars[i].synthetic);
  }
}

TEST(TicksCsv, RoundTripsAndRejectsGarbage) {
  labelstrat::testing::TempDir dir("ticks_csv");
  const std::vector<Tick> ticks{{kT0, 100.5, 0.25}, {kT0 + 7, 99.75, 1.5}};
  write_ticks_csv(dir / "t.csv", ticks);
  const auto back = read_ticks_csv(dir / "t.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].price, 99.75);
  std::ofstream(dir / "bad.csv") << "timestamp_ms,price,quantity\n1,abc,2\n";
  EXPECT_THROW(read_ticks_csv(dir / "bad.csv"), ValidationError);
  EXPECT_THROW(read_ticks_csv(dir / "missing.csv"), ValidationError);
}

namespace {

std::vector<Bar> day_bars(std::int64_t first_day, std::int64_t days) {
  std::vector<Bar> bars;
  for (std::int64_t m = 0; m < days * kMinutesPerDay; ++m) {
    bars.push_back({day_start_ms(first_day) + m * kMinuteMs, 1, 1, 1, 1, 1, 1, false});
  }
  return bars;
}

}  // namespace

TEST(Split, PaperWindowsGiveFourDayGaps) {
  SplitConfig cfg;
  cfg.train = {parse_iso_date("2018-01-01"), parse_iso_date("2019-12-31")};
  cfg.past = {parse_iso_date("2020-01-04"), parse_iso_date("2020-05-05")};
  cfg.future = {parse_iso_date("2020-05-09"), parse_iso_date("2020-09-19")};
  const auto bars = day_bars(cfg.train.first_day, cfg.future.last_day - cfg.train.first_day + 1);
  const auto split = split_datasets(bars, cfg);
  EXPECT_EQ(split.gap_days[0], 4);
  EXPECT_EQ(split.gap_days[1], 4);
  EXPECT_EQ(split.train.size(), 730u * 1440u);
  EXPECT_LT(split.train.end, split.past.begin);
  EXPECT_LT(split.past.end, split.future.begin);
  EXPECT_EQ(bars[split.past.begin].open_time, day_start_ms(cfg.past.first_day));
  EXPECT_EQ(bars[split.future.end - 1].open_time,
            day_start_ms(cfg.future.last_day + 1) - kMinuteMs);
}

TEST(Split, TouchingOrOverlappingWindowsAreRejected) {
  const auto d0 = parse_iso_date("2020-01-01");
  SplitConfig cfg;
  cfg.train = {d0, d0};
  cfg.past = {d0, d0};  // same day: gap 0
  cfg.future = {d0 + 3, d0 + 3};
  EXPECT_THROW(split_datasets(day_bars(d0, 5), cfg), ValidationError);
  cfg.train = {d0, d0 + 2};
  cfg.past = {d0 + 1, d0 + 1};  // overlap: negative gap
  EXPECT_THROW(split_datasets(day_bars(d0, 5), cfg), ValidationError);
}

TEST(Split, OneDayWindowsWithOneDayGaps) {
  const auto d0 = parse_iso_date("2020-01-01");
  SplitConfig cfg;
  cfg.train = {d0, d0};
  cfg.past = {d0 + 1, d0 + 1};
  cfg.future = {d0 + 2, d0 + 2};
  const auto split = split_datasets(day_bars(d0, 3), cfg);
  EXPECT_EQ(split.train.size(), 1440u);
  EXPECT_EQ(split.past.size(), 1440u);
  EXPECT_EQ(split.future.size(), 1440u);
  EXPECT_EQ(split.gap_days[0], 1);
}

TEST(Split, RejectsUncoveredOrEmptyWindows) {
  const auto d0 = parse_iso_date("2020-01-01");
  SplitConfig cfg;
  cfg.train = {d0, d0};
  cfg.past = {d0 + 2, d0 + 2};
  cfg.future = {d0 + 9, d0 + 9};
  EXPECT_THROW(split_datasets(day_bars(d0, 5), cfg), ValidationError);
  cfg.future = {d0 + 4, d0 + 3};
  EXPECT_THROW(split_datasets(day_bars(d0, 5), cfg), ValidationError);
}

TEST(Time, IsoDatesRoundTrip) {
  EXPECT_EQ(parse_iso_date("1970-01-01"), 0);
  EXPECT_EQ(parse_iso_date("2020-01-01"), 18262);
  EXPECT_EQ(format_iso_date(18262), "2020-01-01");
  EXPECT_THROW(parse_iso_date("2020-13-01"), ValidationError);
  EXPECT_THROW(parse_iso_date("yesterday"), ValidationError);
  EXPECT_EQ(floor_to_minute(kT0 + 59'999), kT0);
  EXPECT_EQ(floor_to_minute(-1), -kMinuteMs);
}
