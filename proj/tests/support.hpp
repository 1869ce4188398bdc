#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "labelstrat/classifier.hpp"
#include "labelstrat/features.hpp"
#include "labelstrat/ingest.hpp"
#include "labelstrat/labels.hpp"
#include "labelstrat/rng.hpp"
#include "labelstrat/time.hpp"

namespace labelstrat::testing {

inline constexpr std::int64_t kT0 = 1'577'836'800'000;  // 2020-01-01T00:00Z

/// One bar per price, every field equal to the price, unit volume.
inline std::vector<Bar> flat_bars(const std::vector<double>& prices) {
  std::vector<Bar> bars;
  for (std::size_t i = 0; i < prices.size(); ++i) {
    const double p = prices[i];
    bars.push_back({kT0 + static_cast<std::int64_t>(i) * kMinuteMs, p, p, p, p, 1.0, p, false});
  }
  return bars;
}

/// Geometric random walk where each bar opens at the previous close.
inline std::vector<Bar> random_walk_bars(std::size_t n, std::uint64_t seed, double vol = 0.001,
                                         double start = 100.0) {
  Rng rng(seed);
  std::vector<Bar> bars;
  bars.reserve(n);
  double close = start;
  for (std::size_t i = 0; i < n; ++i) {
    const double open = close;
    close = open * std::exp(vol * rng.normal());
    const double mid = open * std::exp(0.5 * vol * rng.normal());
    const double high = std::max({open, close, mid}) * (1.0 + 0.2 * vol * rng.uniform());
    const double low = std::min({open, close, mid}) * (1.0 - 0.2 * vol * rng.uniform());
    const double vwap = std::clamp(0.25 * (open + close + 2.0 * mid), low, high);
    bars.push_back({kT0 + static_cast<std::int64_t>(i) * kMinuteMs, open, high, low, close,
                    rng.exponential(2.0), vwap, false});
  }
  return bars;
}

/// Two classes (buy and sell) of 2-D Gaussian points clipped to [-1, 1]^2 whose
/// centres lie `separation` apart in L1 along the diagonal. Bars alternate classes.
struct LabelledPoints {
  FeatureMatrix matrix;
  LabelSeries labels;
};

inline LabelledPoints gaussian_classes(std::size_t per_class, double separation, double sd,
                                       std::uint64_t seed) {
  Rng rng(seed);
  const double c = separation / 4.0;
  std::vector<double> values;
  LabelSeries labels;
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    const bool buy = i % 2 == 0;
    const double centre = buy ? c : -c;
    for (int k = 0; k < 2; ++k) values.push_back(std::clamp(centre + sd * rng.normal(), -1.0, 1.0));
    labels.cls.push_back(buy ? kBuy : kSell);
    labels.continuous.push_back(buy ? 0.0 : 2.0);
    labels.valid.push_back(1);
  }
  std::vector<FeatureSpec> specs(2);
  return {FeatureMatrix(specs, 0, 2 * per_class, std::move(values)), std::move(labels)};
}

/// Classes read off the sum of two normalised vwap-minus-SMA features, so the
/// representation A[5], B[50] separates them best.
inline LabelSeries toy_labels(std::span<const Bar> bars, int a = 5, int b = 50,
                              double band = 0.6, double neutral_band = 0.6) {
  const std::vector<FeatureSpec> specs{
      FeatureSpec{FeatureFamily::vwap_minus_sma, a, ParamRange{a, a}, 0},
      FeatureSpec{FeatureFamily::vwap_minus_sma, b, ParamRange{b, b}, 0}};
  const auto m = feature_matrix(bars, specs);
  LabelSeries labels;
  labels.cls.assign(bars.size(), kNeutral);
  labels.continuous.assign(bars.size(), 1.0);
  labels.valid.assign(bars.size(), 0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double s = m.at(r, 0) + m.at(r, 1);
    const std::size_t bar = m.first_bar() + r;
    labels.cls[bar] = s > band ? kBuy : (s < -band ? kSell : kNeutral);
    labels.continuous[bar] = labels.cls[bar];
    labels.valid[bar] = labels.cls[bar] != kNeutral || std::abs(s) < neutral_band;
  }
  return labels;
}

/// Three well separated 2-D clusters, one per class, interleaved in time.
inline Samples cluster_samples(std::size_t n, std::uint64_t seed, double sd = 0.12,
                               bool shuffle_labels = false) {
  static constexpr double kCentres[3][2] = {{-0.6, -0.3}, {0.0, 0.6}, {0.6, -0.3}};
  Rng rng(seed);
  Samples s;
  s.dim = 2;
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::uint8_t>(rng.below(3));
    const double x[2] = {kCentres[c][0] + sd * rng.normal(), kCentres[c][1] + sd * rng.normal()};
    const auto target = shuffle_labels ? static_cast<std::uint8_t>(rng.below(3)) : c;
    s.push(x, target, static_cast<double>(target), i);
  }
  return s;
}

/// Scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(std::filesystem::temp_directory_path() / ("labelstrat_" + name)) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};

}  // namespace labelstrat::testing
