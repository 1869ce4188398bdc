#include "labelstrat/features.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>

#include <fmt/format.h>
#include <fmt/os.h>

#include "labelstrat/error.hpp"

namespace labelstrat {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kSigmaFloor = 1e-12;

constexpr std::array<std::pair<FeatureFamily, std::string_view>, 6> kFamilyNames{{
    {FeatureFamily::vwap_minus_sma, "vwap_minus_sma"},
    {FeatureFamily::vwap_minus_ema, "vwap_minus_ema"},
    {FeatureFamily::momentum, "momentum"},
    {FeatureFamily::realized_vol, "realized_vol"},
    {FeatureFamily::volume_minus_volsma, "volume_minus_volsma"},
    {FeatureFamily::price_channel_position, "price_channel_position"},
}};

// Sliding mean and sum of squared deviations over a fixed window. Extended
// precision plus a periodic exact recompute keeps the running update from drifting.
class RollingMoments {
 public:
  explicit RollingMoments(std::size_t window) : buffer_(window) {}

  void push(double x) {
    const std::size_t w = buffer_.size();
    if (count_ < w) {
      buffer_[count_++] = x;
      const long double d = x - mean_;
      mean_ += d / static_cast<long double>(count_);
      m2_ += d * (x - mean_);
    } else {
      const double old = buffer_[head_];
      buffer_[head_] = x;
      head_ = (head_ + 1) % w;
      const long double old_mean = mean_;
      mean_ += (static_cast<long double>(x) - old) / static_cast<long double>(w);
      m2_ += (static_cast<long double>(x) - old) * ((x - mean_) + (old - old_mean));
      if (m2_ < 0.0L) m2_ = 0.0L;
    }
    if (++since_refresh_ >= kRefreshInterval && full()) refresh();
  }

  bool full() const noexcept { return count_ == buffer_.size(); }
  double mean() const noexcept { return static_cast<double>(mean_); }
  double sample_variance() const noexcept {
    return count_ < 2 ? 0.0 : static_cast<double>(m2_ / static_cast<long double>(count_ - 1));
  }

 private:
  static constexpr std::size_t kRefreshInterval = 1 << 14;

  void refresh() {
    long double sum = 0.0L;
    for (double v : buffer_) sum += v;
    mean_ = sum / static_cast<long double>(buffer_.size());
    long double ss = 0.0L;
    for (double v : buffer_) ss += (v - mean_) * (v - mean_);
    m2_ = ss;
    since_refresh_ = 0;
  }

  std::vector<double> buffer_;
  std::size_t head_ = 0;
  std::size_t count_ = 0;
  std::size_t since_refresh_ = 0;
  long double mean_ = 0.0L;
  long double m2_ = 0.0L;
};

template <class Get>
std::vector<double> minus_sma(std::size_t n, std::size_t window, Get value) {
  std::vector<double> out(n, kNaN);
  RollingMoments moments(window);
  for (std::size_t i = 0; i < n; ++i) {
    moments.push(value(i));
    if (moments.full()) out[i] = value(i) - moments.mean();
  }
  return out;
}

std::vector<double> vwap_minus_ema(std::span<const Bar> bars, int param) {
  std::vector<double> out(bars.size(), kNaN);
  if (bars.empty()) return out;
  const double alpha = 2.0 / (static_cast<double>(param) + 1.0);
  double ema = bars.front().vwap;
  const std::size_t warmup = raw_warmup(FeatureFamily::vwap_minus_ema, param);
  for (std::size_t i = 0; i < bars.size(); ++i) {
    if (i > 0) ema += alpha * (bars[i].vwap - ema);
    if (i >= warmup) out[i] = bars[i].vwap - ema;
  }
  return out;
}

std::vector<double> momentum(std::span<const Bar> bars, int param) {
  std::vector<double> out(bars.size(), kNaN);
  const auto lag = static_cast<std::size_t>(param);
  for (std::size_t i = lag; i < bars.size(); ++i) out[i] = bars[i].vwap / bars[i - lag].vwap - 1.0;
  return out;
}

std::vector<double> realized_vol(std::span<const Bar> bars, int param) {
  std::vector<double> out(bars.size(), kNaN);
  RollingMoments moments(static_cast<std::size_t>(param));
  for (std::size_t i = 1; i < bars.size(); ++i) {
    moments.push(std::log(bars[i].vwap / bars[i - 1].vwap));
    if (moments.full()) out[i] = std::sqrt(moments.sample_variance());
  }
  return out;
}

std::vector<double> price_channel_position(std::span<const Bar> bars, int param) {
  std::vector<double> out(bars.size(), kNaN);
  const auto w = static_cast<std::size_t>(param);
  std::deque<std::size_t> highs;
  std::deque<std::size_t> lows;
  for (std::size_t i = 0; i < bars.size(); ++i) {
    while (!highs.empty() && bars[highs.back()].high <= bars[i].high) highs.pop_back();
    highs.push_back(i);
    while (!lows.empty() && bars[lows.back()].low >= bars[i].low) lows.pop_back();
    lows.push_back(i);
    if (highs.front() + w <= i) highs.pop_front();
    if (lows.front() + w <= i) lows.pop_front();
    if (i + 1 < w) continue;
    const double hh = bars[highs.front()].high;
    const double ll = bars[lows.front()].low;
    out[i] = hh > ll ? (2.0 * bars[i].close - hh - ll) / (hh - ll) : 0.0;
  }
  return out;
}

}  // namespace

std::string_view family_name(FeatureFamily family) {
  for (const auto& [f, name] : kFamilyNames) {
    if (f == family) return name;
  }
  return "unknown";
}

FeatureFamily parse_family(std::string_view name) {
  for (const auto& [f, n] : kFamilyNames) {
    if (n == name) return f;
  }
  throw ValidationError(fmt::format("unknown feature family '{}'", name));
}

int default_norm_window(int param) { return std::clamp(12 * param, 2, 1440); }

int FeatureSpec::effective_norm_window() const {
  return norm_window > 0 ? norm_window : default_norm_window(param);
}

std::string FeatureSpec::label() const {
  return fmt::format("{}[{}]", family_name(family), param);
}

std::size_t raw_warmup(FeatureFamily family, int param) {
  const auto p = static_cast<std::size_t>(std::max(param, 1));
  switch (family) {
    case FeatureFamily::momentum:
    case FeatureFamily::realized_vol:
      return p;
    case FeatureFamily::vwap_minus_sma:
    case FeatureFamily::vwap_minus_ema:
    case FeatureFamily::volume_minus_volsma:
    case FeatureFamily::price_channel_position:
      return p - 1;
  }
  return p;
}

std::size_t total_warmup(const FeatureSpec& spec) {
  return raw_warmup(spec.family, spec.param) +
         static_cast<std::size_t>(spec.effective_norm_window()) - 1;
}

void validate(const FeatureSpec& spec) {
  if (!spec.range.contains(spec.param)) {
    throw ValidationError(fmt::format("{}: parameter outside [{}, {}]", spec.label(),
                                      spec.range.lo, spec.range.hi));
  }
  const int min_param = spec.family == FeatureFamily::realized_vol ? 2 : 1;
  if (spec.param < min_param) {
    throw ValidationError(fmt::format("{}: parameter must be at least {}", spec.label(), min_param));
  }
  if (spec.norm_window != 0 && spec.norm_window < 2) {
    throw ValidationError(fmt::format("{}: normalisation window must be at least 2", spec.label()));
  }
}

std::size_t max_warmup(const FeatureSpace& space) {
  std::size_t worst = 0;
  for (const auto& slot : space) {
    // Warm-up is monotone in the parameter, so the top of the range bounds it.
    FeatureSpec spec{slot.family, slot.range.hi, slot.range, slot.norm_window};
    worst = std::max(worst, total_warmup(spec));
  }
  return worst;
}

std::size_t space_cardinality(const FeatureSpace& space) {
  std::size_t total = 1;
  for (const auto& slot : space) {
    const std::size_t n = slot.range.size();
    if (total > std::numeric_limits<std::size_t>::max() / n) {
      return std::numeric_limits<std::size_t>::max();
    }
    total *= n;
  }
  return total;
}

std::vector<double> raw_feature(std::span<const Bar> bars, const FeatureSpec& spec) {
  validate(spec);
  const auto window = static_cast<std::size_t>(spec.param);
  switch (spec.family) {
    case FeatureFamily::vwap_minus_sma:
      return minus_sma(bars.size(), window, [&](std::size_t i) { return bars[i].vwap; });
    case FeatureFamily::vwap_minus_ema:
      return vwap_minus_ema(bars, spec.param);
    case FeatureFamily::momentum:
      return momentum(bars, spec.param);
    case FeatureFamily::realized_vol:
      return realized_vol(bars, spec.param);
    case FeatureFamily::volume_minus_volsma:
      return minus_sma(bars.size(), window, [&](std::size_t i) { return bars[i].volume; });
    case FeatureFamily::price_channel_position:
      return price_channel_position(bars, spec.param);
  }
  throw ValidationError("unknown feature family");
}

std::vector<double> normalize(std::span<const double> series, int norm_window) {
  if (norm_window < 2) throw ValidationError("normalisation window must be at least 2");
  std::vector<double> out(series.size(), kNaN);
  RollingMoments moments(static_cast<std::size_t>(norm_window));
  std::size_t finite_run = 0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double x = series[i];
    if (!std::isfinite(x)) {
      moments = RollingMoments(static_cast<std::size_t>(norm_window));
      finite_run = 0;
      continue;
    }
    moments.push(x);
    ++finite_run;
    if (finite_run < static_cast<std::size_t>(norm_window)) continue;
    const double sigma = std::sqrt(moments.sample_variance());
    out[i] = sigma < kSigmaFloor ? 0.0 : (2.0 / std::numbers::pi) * std::atan(x / sigma);
  }
  return out;
}

FeatureMatrix::FeatureMatrix(std::vector<FeatureSpec> specs, std::size_t first_bar,
                             std::size_t rows, std::vector<double> values)
    : specs_(std::move(specs)), first_bar_(first_bar), rows_(rows), values_(std::move(values)) {}

std::optional<std::span<const double>> FeatureMatrix::row_for_bar(std::size_t bar) const {
  if (bar < first_bar_ || bar - first_bar_ >= rows_) return std::nullopt;
  return row(bar - first_bar_);
}

std::vector<std::string> FeatureMatrix::column_names() const {
  std::vector<std::string> names;
  names.reserve(specs_.size());
  for (const auto& s : specs_) names.push_back(s.label());
  return names;
}

FeatureMatrix feature_matrix(std::span<const Bar> bars, std::span<const FeatureSpec> specs) {
  return feature_matrix(bars, specs, 0);
}

FeatureMatrix feature_matrix(std::span<const Bar> bars, std::span<const FeatureSpec> specs,
                             std::size_t min_first_bar) {
  if (specs.empty()) throw ValidationError("feature set is empty");
  std::size_t first = min_first_bar;
  for (const auto& s : specs) {
    validate(s);
    first = std::max(first, total_warmup(s));
  }
  const std::size_t rows = bars.size() > first ? bars.size() - first : 0;
  const std::size_t cols = specs.size();
  std::vector<double> values(rows * cols);
  for (std::size_t c = 0; c < cols; ++c) {
    const auto column = normalize(raw_feature(bars, specs[c]), specs[c].effective_norm_window());
    for (std::size_t r = 0; r < rows; ++r) values[r * cols + c] = column[first + r];
  }
  return FeatureMatrix({specs.begin(), specs.end()}, first, rows, std::move(values));
}

void write_feature_matrix_csv(const std::filesystem::path& path, std::span<const Bar> bars,
                              const FeatureMatrix& matrix) {
  auto out = fmt::output_file(path.string());
  out.print("open_time");
  for (const auto& name : matrix.column_names()) out.print(",{}", name);
  out.print("\n");
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    out.print("{}", bars[matrix.first_bar() + r].open_time);
    for (double v : matrix.row(r)) out.print(",{}", v);
    out.print("\n");
  }
}

}  // namespace labelstrat
