#include "labelstrat/synth.hpp"

#include <algorithm>
#include <cmath>

#include "labelstrat/error.hpp"
#include "labelstrat/rng.hpp"
#include "labelstrat/time.hpp"

namespace labelstrat {

std::vector<Tick> generate_ticks(const SynthConfig& config) {
  if (config.days < 1) throw ValidationError("synthetic market needs at least one day");
  if (!(config.initial_price > 0.0) || !(config.ticks_per_minute > 0.0) ||
      !(config.mean_regime_minutes >= 1.0) || !(config.mean_quantity > 0.0) ||
      config.volatility_per_minute < 0.0 || config.trend_probability < 0.0 ||
      config.trend_probability > 1.0) {
    throw ValidationError("invalid synthetic market parameters");
  }
  Rng rng(config.seed);
  const std::int64_t minutes = static_cast<std::int64_t>(config.days) * kMinutesPerDay;
  const std::int64_t start = day_start_ms(config.start_day);
  const double switch_probability = 1.0 / config.mean_regime_minutes;
  const double tick_vol = config.volatility_per_minute / std::sqrt(config.ticks_per_minute);

  std::vector<Tick> ticks;
  ticks.reserve(static_cast<std::size_t>(static_cast<double>(minutes) * config.ticks_per_minute * 1.1));
  std::vector<std::int64_t> offsets;
  double log_price = std::log(config.initial_price);
  int regime = 0;  // -1 down, 0 flat, +1 up
  for (std::int64_t m = 0; m < minutes; ++m) {
    if (m == 0 || rng.uniform() < switch_probability) {
      const double u = rng.uniform();
      regime = u < config.trend_probability / 2.0 ? 1
               : u < config.trend_probability     ? -1
                                                  : 0;
    }
    const double drift = regime * config.drift_per_minute;
    const double qty_mean =
        config.mean_quantity * (regime != 0 ? config.trend_volume_multiplier : 1.0);
    const std::uint32_t count = rng.poisson(config.ticks_per_minute);
    if (count == 0) {
      log_price += drift + config.volatility_per_minute * rng.normal();
      continue;
    }
    offsets.resize(count);
    for (auto& o : offsets) o = static_cast<std::int64_t>(rng.below(kMinuteMs));
    std::sort(offsets.begin(), offsets.end());
    for (std::int64_t o : offsets) {
      log_price += drift / config.ticks_per_minute + tick_vol * rng.normal();
      ticks.push_back({start + m * kMinuteMs + o, std::exp(log_price),
                       std::max(1e-8, rng.exponential(qty_mean))});
    }
  }
  return ticks;
}

}  // namespace labelstrat
