#include "labelstrat/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>
#include <fmt/os.h>

#include "labelstrat/error.hpp"
#include "labelstrat/stats.hpp"
#include "labelstrat/time.hpp"

namespace labelstrat {

std::vector<double> BacktestResult::returns() const {
  std::vector<double> out(equity.size());
  double prev = 1.0;
  for (std::size_t i = 0; i < equity.size(); ++i) {
    out[i] = equity[i] / prev - 1.0;
    prev = equity[i];
  }
  return out;
}

BacktestResult run_backtest(std::span<const Bar> bars, std::span<const double> executed,
                            double fee_rate) {
  if (executed.size() != bars.size()) {
    throw ValidationError(fmt::format("{} positions for {} bars", executed.size(), bars.size()));
  }
  if (!(fee_rate >= 0.0 && fee_rate < 1.0)) {
    throw ValidationError(fmt::format("fee rate {} outside [0, 1)", fee_rate));
  }
  BacktestResult result;
  result.equity.resize(bars.size());
  result.held.resize(bars.size());
  double equity = 1.0;
  double q = 0.0;
  for (std::size_t j = 0; j < bars.size(); ++j) {
    const Bar& bar = bars[j];
    if (j > 0) {
      equity *= 1.0 + q * (bar.open / bars[j - 1].close - 1.0);
      const double target = executed[j - 1];
      if (target < 0.0 || target > 1.0 || !std::isfinite(target)) {
        throw ValidationError(fmt::format("position {} at bar {} outside [0, 1]", target, j - 1));
      }
      if (target != q) {
        Fill fill{j, q, target, std::abs(target - q) * equity, 0.0};
        fill.fee = fee_rate * fill.notional;
        equity -= fill.fee;
        result.fills.push_back(fill);
        q = target;
      }
    }
    equity *= 1.0 + q * (bar.close / bar.open - 1.0);
    result.equity[j] = equity;
    result.held[j] = q;
  }
  if (!bars.empty() && executed.back() != q) {
    result.warnings.push_back(fmt::format(
        "position change decided at the final bar {} has no next open and was dropped",
        bars.size() - 1));
  }
  return result;
}

BacktestResult run_backtest(std::span<const Bar> bars, const PositionSeries& positions,
                            double fee_rate) {
  return run_backtest(bars, positions.executed, fee_rate);
}

BacktestMetrics compute_metrics(const BacktestResult& result, double window_days) {
  if (!(window_days > 0.0)) throw std::invalid_argument("window length must be positive");
  BacktestMetrics m;
  m.window_days = window_days;
  const double final_equity = result.equity.empty() ? 1.0 : result.equity.back();
  m.total_return = final_equity - 1.0;
  m.monthly_return = (std::pow(final_equity, 30.0 / window_days) - 1.0) * 100.0;
  m.transactions = result.fills.size();
  m.transactions_per_month = static_cast<double>(m.transactions) * 30.0 / window_days;
  m.mean_capital_involvement = result.held.empty() ? 0.0 : mean(result.held) * 100.0;
  const auto r = result.returns();
  m.return_volatility = r.size() > 1 ? sample_stddev(r) : 0.0;
  return m;
}

BacktestMetrics compute_metrics(const BacktestResult& result) {
  return compute_metrics(result, static_cast<double>(result.bars()) / kMinutesPerDay);
}

StrategyScore score(const BacktestMetrics& metrics) {
  StrategyScore s;
  s.monthly_return = metrics.monthly_return;
  s.transaction_penalty =
      std::max(0.0, kTargetTransactionsPerMonth - metrics.transactions_per_month);
  s.capital_penalty =
      std::max(0.0, (kTargetCapitalInvolvement - metrics.mean_capital_involvement) / 2.0);
  s.score = s.monthly_return - s.transaction_penalty - s.capital_penalty;
  return s;
}

bool significance_flag(const BacktestMetrics& metrics) {
  return metrics.transactions_per_month >= kSignificantTransactionsPerMonth;
}

void write_equity_csv(const std::filesystem::path& path, std::span<const Bar> bars,
                      const BacktestResult& result) {
  if (bars.size() != result.bars()) throw std::invalid_argument("equity is not aligned to the bars");
  auto out = fmt::output_file(path.string());
  out.print("open_time,equity,position\n");
  for (std::size_t i = 0; i < bars.size(); ++i) {
    out.print("{},{},{}\n", bars[i].open_time, result.equity[i], result.held[i]);
  }
}

}  // namespace labelstrat
