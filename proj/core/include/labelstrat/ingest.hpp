#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace labelstrat {

struct Tick {
  std::int64_t timestamp_ms = 0;  // UTC
  double price = 0.0;
  double quantity = 0.0;
};

/// One aggregated minute of trading.
struct Bar {
  std::int64_t open_time = 0;  // minute-aligned UTC milliseconds
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
  double volume = 0.0;
  double vwap = 0.0;
  bool synthetic = false;  // gap-filled minute without trades
};

/// Buckets time-sorted ticks into one-minute bars.
///
/// Minutes without trades between two traded minutes become synthetic bars
/// with zero volume and every price equal to the previous close. Throws
/// IngestError for an empty input, non-positive price or quantity, or
/// timestamps out of order; the error carries the first offending index.
std::vector<Bar> aggregate_ticks(std::span<const Tick> ticks);

std::vector<Tick> read_ticks_csv(const std::filesystem::path& path);
void write_ticks_csv(const std::filesystem::path& path, std::span<const Tick> ticks);

std::vector<Bar> read_bars_csv(const std::filesystem::path& path);
void write_bars_csv(const std::filesystem::path& path, std::span<const Bar> bars);

/// Calendar window of whole UTC days, both ends inclusive.
struct DateWindow {
  std::int64_t first_day = 0;
  std::int64_t last_day = 0;
};

/// Train / past / future windows plus the embargo policy between them.
///
/// The gap between two windows is measured in calendar days from the last
/// day of one window to the first day of the next and must reach
/// `min_gap_days` (at least one).
struct SplitConfig {
  DateWindow train;
  DateWindow past;
  DateWindow future;
  std::int64_t min_gap_days = 1;
};

/// Half-open range [begin, end) of bar indices.
struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  bool empty() const noexcept { return end <= begin; }
};

struct DatasetSplit {
  IndexRange train;
  IndexRange past;
  IndexRange future;
  std::array<std::int64_t, 2> gap_days{};  // train->past, past->future
};

/// Locates the three windows inside `bars` (sorted by open_time).
/// Throws ValidationError for overlapping or touching windows, empty
/// windows, or bars that do not cover a window.
DatasetSplit split_datasets(std::span<const Bar> bars, const SplitConfig& config);

inline std::span<const Bar> slice(std::span<const Bar> bars, IndexRange range) {
  return bars.subspan(range.begin, range.size());
}

}  // namespace labelstrat
