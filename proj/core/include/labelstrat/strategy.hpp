#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "labelstrat/ingest.hpp"

namespace labelstrat {

/// Linear combination of classifier outputs plus three execution thresholds.
/// `weights` is label-major: [p_buy(label 1), p_sell(label 1), p_buy(label 2), ...].
struct StrategyParams {
  std::vector<double> weights;
  double y_buy = 0.75;
  double y_sell = 0.25;
  double y_width = 0.10;
};

/// Bounds each sampled parameter is drawn from.
struct StrategySpace {
  std::size_t label_count = 8;
  double y_buy_lo = 0.7, y_buy_hi = 1.0;
  double y_sell_lo = 0.0, y_sell_hi = 0.3;
  double y_width_lo = 0.02, y_width_hi = 0.1;
  double weight_lo = -1.0, weight_hi = 1.0;

  std::size_t parameter_count() const noexcept { return 2 * label_count + 3; }
};

/// Throws ValidationError when y_sell >= y_buy or a value leaves the space bounds.
void validate(const StrategyParams& params, const StrategySpace& space);

/// clamp((x + 1) / 2, 0, 1). Throws std::invalid_argument for non-finite x.
double phi(double x);

/// phi(dot(weights, inputs)). Throws std::invalid_argument on a size mismatch.
double signal(std::span<const double> weights, std::span<const double> inputs);

/// Per-bar model outputs feeding the strategies, row-major with `width` columns.
struct SignalInputs {
  std::size_t width = 0;
  std::vector<double> values;

  std::size_t rows() const noexcept { return width == 0 ? 0 : values.size() / width; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * width, width}; }
  SignalInputs slice(std::size_t begin, std::size_t end) const;
};

std::vector<double> signals(const SignalInputs& inputs, const StrategyParams& params);

struct PositionChange {
  std::size_t bar = 0;
  double from = 0.0;
  double to = 0.0;
};

struct PositionSeries {
  std::vector<double> desired;   // signal y per bar
  std::vector<double> executed;  // long fraction after the decision at each bar
  std::vector<PositionChange> transactions;
};

/// Three-threshold execution starting flat. The position jumps to y when
/// y > y_buy and y - q > y_width, or when y < y_sell and q - y > y_width;
/// otherwise it holds.
PositionSeries execute(std::span<const double> signal_series, const StrategyParams& params);

void write_positions_csv(const std::filesystem::path& path, std::span<const Bar> bars,
                         const PositionSeries& positions);

}  // namespace labelstrat
