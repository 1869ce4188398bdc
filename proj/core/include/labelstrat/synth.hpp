#pragma once

#include <cstdint>
#include <vector>

#include "labelstrat/ingest.hpp"

namespace labelstrat {

/// Regime-switching geometric random walk. Each regime carries a per-minute
/// log drift of +drift, 0 or -drift and lasts a geometric number of minutes.
struct SynthConfig {
  std::int64_t start_day = 18262;  // 2020-01-01
  int days = 30;
  double initial_price = 10000.0;
  double ticks_per_minute = 3.0;
  double volatility_per_minute = 0.0008;
  double drift_per_minute = 0.0003;
  double mean_regime_minutes = 120.0;
  double trend_probability = 0.6;   // share of regimes that trend (split evenly up/down)
  double mean_quantity = 0.5;
  double trend_volume_multiplier = 1.5;
  std::uint64_t seed = 1;
};

std::vector<Tick> generate_ticks(const SynthConfig& config);

}  // namespace labelstrat
