#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "labelstrat/ingest.hpp"
#include "labelstrat/strategy.hpp"

namespace labelstrat {

inline constexpr double kDefaultFeeRate = 0.0005;

struct Fill {
  std::size_t bar = 0;  // bar whose open executed the order
  double from = 0.0;
  double to = 0.0;
  double notional = 0.0;  // |to - from| * equity before the fee
  double fee = 0.0;
};

struct BacktestResult {
  std::vector<double> equity;  // at each bar close, starting from 1.0
  std::vector<double> held;    // long fraction held through each bar's close
  std::vector<Fill> fills;
  std::vector<std::string> warnings;
  std::size_t bars() const noexcept { return equity.size(); }
  /// Per-bar equity returns, the first relative to the initial 1.0.
  std::vector<double> returns() const;
};

/// Simulates the executed positions against the bars. A change decided at the
/// close of bar i fills at the open of bar i+1 with a proportional fee on the
/// traded notional. Positions are fractions of current equity (self-financing
/// rebalance). A change decided at the final bar has no fill and is dropped
/// with a warning.
BacktestResult run_backtest(std::span<const Bar> bars, std::span<const double> executed,
                            double fee_rate);
BacktestResult run_backtest(std::span<const Bar> bars, const PositionSeries& positions,
                            double fee_rate);

struct BacktestMetrics {
  double monthly_return = 0.0;          // percent per 30 days, geometric
  double transactions_per_month = 0.0;  // per 30 days
  double mean_capital_involvement = 0.0;  // percent
  double return_volatility = 0.0;       // sample std of per-bar returns
  double total_return = 0.0;            // final / initial - 1
  std::size_t transactions = 0;
  double window_days = 0.0;
};

/// Throws std::invalid_argument when window_days <= 0.
BacktestMetrics compute_metrics(const BacktestResult& result, double window_days);
/// Window length inferred from the bar count (1440 bars per day).
BacktestMetrics compute_metrics(const BacktestResult& result);

struct StrategyScore {
  double score = 0.0;
  double monthly_return = 0.0;
  double transaction_penalty = 0.0;
  double capital_penalty = 0.0;
};

inline constexpr double kTargetTransactionsPerMonth = 30.0;
inline constexpr double kTargetCapitalInvolvement = 25.0;
inline constexpr double kSignificantTransactionsPerMonth = 5.0;

/// S = MR - TP - MCIP with TP = max(0, 30 - tx/month) and MCIP = max(0, (25 - MCI) / 2).
StrategyScore score(const BacktestMetrics& metrics);

/// At least five transactions per month.
bool significance_flag(const BacktestMetrics& metrics);

/// Writes `open_time,equity,position`.
void write_equity_csv(const std::filesystem::path& path, std::span<const Bar> bars,
                      const BacktestResult& result);

}  // namespace labelstrat
