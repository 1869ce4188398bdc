#include "labelstrat/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>
#include <fmt/os.h>

#include "labelstrat/error.hpp"

namespace labelstrat {

namespace {

void check_bound(const char* name, double value, double lo, double hi) {
  if (!std::isfinite(value) || value < lo || value > hi) {
    throw ValidationError(fmt::format("{} = {} outside [{}, {}]", name, value, lo, hi));
  }
}

}  // namespace

void validate(const StrategyParams& params, const StrategySpace& space) {
  if (params.weights.size() != 2 * space.label_count) {
    throw ValidationError(fmt::format("strategy has {} weights, expected {}",
                                      params.weights.size(), 2 * space.label_count));
  }
  if (!(params.y_sell < params.y_buy)) {
    throw ValidationError(
        fmt::format("y_sell ({}) must be below y_buy ({})", params.y_sell, params.y_buy));
  }
  check_bound("y_buy", params.y_buy, space.y_buy_lo, space.y_buy_hi);
  check_bound("y_sell", params.y_sell, space.y_sell_lo, space.y_sell_hi);
  check_bound("y_width", params.y_width, space.y_width_lo, space.y_width_hi);
  for (double w : params.weights) check_bound("weight", w, space.weight_lo, space.weight_hi);
}

double phi(double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("phi of a non-finite value");
  return std::clamp((x + 1.0) / 2.0, 0.0, 1.0);
}

double signal(std::span<const double> weights, std::span<const double> inputs) {
  if (weights.size() != inputs.size()) {
    throw std::invalid_argument(fmt::format("signal has {} weights for {} inputs",
                                            weights.size(), inputs.size()));
  }
  double x = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) x += weights[i] * inputs[i];
  return phi(x);
}

SignalInputs SignalInputs::slice(std::size_t begin, std::size_t end) const {
  SignalInputs out;
  out.width = width;
  end = std::min(end, rows());
  if (begin < end) {
    out.values.assign(values.begin() + static_cast<std::ptrdiff_t>(begin * width),
                      values.begin() + static_cast<std::ptrdiff_t>(end * width));
  }
  return out;
}

std::vector<double> signals(const SignalInputs& inputs, const StrategyParams& params) {
  std::vector<double> out(inputs.rows());
  for (std::size_t r = 0; r < out.size(); ++r) out[r] = signal(params.weights, inputs.row(r));
  return out;
}

PositionSeries execute(std::span<const double> signal_series, const StrategyParams& params) {
  PositionSeries out;
  out.desired.assign(signal_series.begin(), signal_series.end());
  out.executed.resize(signal_series.size());
  double q = 0.0;
  for (std::size_t i = 0; i < signal_series.size(); ++i) {
    const double y = signal_series[i];
    const bool increase = y > params.y_buy && y - q > params.y_width && y > q;
    const bool decrease = y < params.y_sell && q - y > params.y_width && y < q;
    if (increase || decrease) {
      out.transactions.push_back({i, q, y});
      q = y;
    }
    out.executed[i] = q;
  }
  return out;
}

void write_positions_csv(const std::filesystem::path& path, std::span<const Bar> bars,
                         const PositionSeries& positions) {
  if (bars.size() != positions.executed.size()) {
    throw std::invalid_argument("positions are not aligned to the bars");
  }
  auto out = fmt::output_file(path.string());
  out.print("open_time,desired,executed\n");
  for (std::size_t i = 0; i < bars.size(); ++i) {
    out.print("{},{},{}\n", bars[i].open_time, positions.desired[i], positions.executed[i]);
  }
}

}  // namespace labelstrat
