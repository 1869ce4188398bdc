#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "labelstrat/ingest.hpp"

namespace labelstrat {

enum class LabelKind { threshold, ma_threshold };

/// Class coordinates used everywhere downstream.
enum LabelClass : std::uint8_t { kBuy = 0, kNeutral = 1, kSell = 2 };

struct LabelSpec {
  std::string name;
  LabelKind kind = LabelKind::threshold;
  double tau = 0.012;   // return threshold as a fraction
  int horizon = 5;      // minutes ahead (threshold kind)
  int ma_window = 5;    // minutes averaged after the bar (ma_threshold kind)
};

/// Throws ValidationError unless tau > 0 and the windows are at least one minute.
void validate(const LabelSpec& spec);

/// Per-bar targets. Bars near the end whose horizon runs past the series are
/// marked invalid and carry neutral placeholders.
struct LabelSeries {
  std::vector<std::uint8_t> cls;
  std::vector<double> continuous;  // in [0, 2]
  std::vector<std::uint8_t> valid;

  std::size_t size() const noexcept { return cls.size(); }
  std::array<std::size_t, 3> class_counts() const;
  std::size_t valid_count() const;
};

/// p[i + horizon] / p[i] - 1, or nullopt when the index runs past the series.
std::optional<double> forward_return(std::span<const double> prices, std::size_t i,
                                     std::size_t horizon);

/// sgn(r) when |r| > tau, else 0.
int threshold_direction(double r, double tau);

/// Cubic companion: (r/tau)^3 inside the band, sgn(r) outside.
double continuous_direction(double r, double tau);

/// Maps a direction in [-1, 1] to class coordinates: 1 - y.
inline double direction_to_class(double y) { return 1.0 - y; }

LabelSeries threshold_label(std::span<const double> prices, const LabelSpec& spec);

/// Threshold rule against the mean vwap of bars i+1 .. i+ma_window.
LabelSeries ma_threshold_label(std::span<const Bar> bars, const LabelSpec& spec);

/// Dispatches on spec.kind; threshold labels use bar vwap as the price.
LabelSeries compute_labels(std::span<const Bar> bars, const LabelSpec& spec);

std::vector<double> vwap_prices(std::span<const Bar> bars);

using LabelFunction = std::function<LabelSeries(std::span<const Bar>)>;

/// Named label definitions. Plugins register a function under a new name.
class LabelRegistry {
 public:
  /// Registry preloaded with the five shipped threshold labels.
  static LabelRegistry with_builtin();

  void add(std::string name, LabelFunction fn);
  void add(const LabelSpec& spec);

  bool contains(std::string_view name) const;
  const LabelFunction& at(std::string_view name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, LabelFunction, std::less<>> entries_;
};

std::vector<LabelSpec> builtin_label_specs();

/// Writes `open_time,class,continuous` for valid bars.
void write_labels_csv(const std::filesystem::path& path, std::span<const Bar> bars,
                      const LabelSeries& labels);

}  // namespace labelstrat
