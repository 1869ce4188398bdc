#include <gtest/gtest.h>

#include "labelstrat/backtest.hpp"
#include "labelstrat/error.hpp"
#include "support.hpp"

using namespace labelstrat;
using labelstrat::testing::flat_bars;
using labelstrat::testing::random_walk_bars;

namespace {

std::vector<double> random_positions(std::size_t n, Rng& rng, double change_prob = 0.02) {
  std::vector<double> q(n);
  double cur = 0.0;
  for (auto& v : q) {
    if (rng.uniform() < change_prob) cur = rng.uniform() < 0.3 ? 0.0 : rng.uniform();
    v = cur;
  }
  return q;
}

/// Bars 100 -> 110 -> 110 for the single round trip.
std::vector<Bar> round_trip_bars() {
  auto bars = flat_bars({100.0, 100.0, 110.0, 110.0});
  bars[1].close = 110.0;
  bars[2].open = 110.0;
  return bars;
}

BacktestMetrics make_metrics(double mr, double tx, double mci) {
  BacktestMetrics m;
  m.monthly_return = mr;
  m.transactions_per_month = tx;
  m.mean_capital_involvement = mci;
  return m;
}

}  // namespace

TEST(Backtest, FlatPricesKeepEquity) {
  Rng rng(1);
  const auto bars = flat_bars(std::vector<double>(500, 42.0));
  const auto r = run_backtest(bars, random_positions(500, rng, 0.1), 0.0);
  EXPECT_NEAR(r.equity.back(), 1.0, 1e-9);
}

TEST(Backtest, SingleRoundTrip) {
  const std::vector<double> q{1.0, 0.0, 0.0, 0.0};
  const auto r = run_backtest(round_trip_bars(), q, 0.0);
  EXPECT_NEAR(r.equity.back(), 1.10, 1e-9);
  ASSERT_EQ(r.fills.size(), 2u);
  EXPECT_EQ(r.fills[0].bar, 1u);
  EXPECT_EQ(r.fills[1].bar, 2u);
  EXPECT_EQ(r.held, (std::vector<double>{0.0, 1.0, 0.0, 0.0}));
}

TEST(Backtest, RoundTripWithFees) {
  const std::vector<double> q{1.0, 0.0, 0.0, 0.0};
  const auto r = run_backtest(round_trip_bars(), q, 0.0005);
  EXPECT_NEAR(r.equity.back(), 0.9995 * 1.10 * 0.9995, 1e-12);
  EXPECT_NEAR(r.equity.back(), 1.09890, 1e-5);
  EXPECT_NEAR(r.fills[0].fee, 0.0005, 1e-15);
}

TEST(Backtest, ZeroFeeMatchesProductOracle) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(100 + seed);
    const auto bars = random_walk_bars(10000, seed + 1);
    const auto q = random_positions(bars.size(), rng);
    const auto r = run_backtest(bars, q, 0.0);
    double equity = 1.0;
    for (std::size_t j = 1; j < bars.size(); ++j) {
      equity *= 1.0 + q[j - 1] * (bars[j].close / bars[j - 1].close - 1.0);
    }
    EXPECT_NEAR(r.equity.back(), equity, 1e-9);
  }
}

TEST(Backtest, EquityNonIncreasingInFee) {
  Rng rng(7);
  const auto bars = random_walk_bars(2000, 8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto q = random_positions(bars.size(), rng, 0.05);
    double previous = run_backtest(bars, q, 0.0).equity.back();
    for (double fee : {0.0001, 0.0005, 0.001, 0.01}) {
      const double e = run_backtest(bars, q, fee).equity.back();
      EXPECT_LE(e, previous);
      previous = e;
    }
  }
}

TEST(Backtest, LastBarChangeIsDroppedWithWarning) {
  const auto bars = flat_bars({1.0, 1.0, 1.0});
  const auto r = run_backtest(bars, std::vector<double>{0.0, 0.0, 1.0}, 0.001);
  EXPECT_TRUE(r.fills.empty());
  EXPECT_EQ(r.warnings.size(), 1u);
  EXPECT_EQ(r.equity.back(), 1.0);
}

TEST(Backtest, RejectsBadInputs) {
  const auto bars = flat_bars({1.0, 1.0});
  EXPECT_THROW(run_backtest(bars, std::vector<double>{0.0}, 0.0), ValidationError);
  EXPECT_THROW(run_backtest(bars, std::vector<double>{1.5, 0.0}, 0.0), ValidationError);
  EXPECT_THROW(run_backtest(bars, std::vector<double>{0.0, 0.0}, -0.1), ValidationError);
}

TEST(Metrics, WorkedExamples) {
  BacktestResult r;
  r.equity.assign(10, 1.0);
  r.equity.back() = 1.1025;
  r.held.assign(10, 0.0);
  for (std::size_t i = 0; i < 5; ++i) r.held[i] = 1.0;
  r.fills.resize(30);
  const auto m = compute_metrics(r, 60.0);
  EXPECT_NEAR(m.monthly_return, 5.0, 1e-9);
  EXPECT_NEAR(m.transactions_per_month, 15.0, 1e-12);
  EXPECT_NEAR(m.mean_capital_involvement, 50.0, 1e-12);
  EXPECT_NEAR(compute_metrics(r, 30.0).transactions_per_month, 30.0, 1e-12);
  EXPECT_THROW(compute_metrics(r, 0.0), std::invalid_argument);
}

TEST(Metrics, InferredWindowAndVolatility) {
  const auto bars = random_walk_bars(2880, 3);
  const auto r = run_backtest(bars, std::vector<double>(bars.size(), 1.0), 0.0);
  const auto m = compute_metrics(r);
  EXPECT_DOUBLE_EQ(m.window_days, 2.0);
  EXPECT_GT(m.return_volatility, 0.0);
  EXPECT_NEAR(m.mean_capital_involvement, 100.0 * 2879.0 / 2880.0, 1e-9);  // first bar is flat
}

TEST(Score, WorkedExamples) {
  EXPECT_EQ(score(make_metrics(5.0, 20.0, 10.0)).score, -12.5);
  EXPECT_EQ(score(make_metrics(8.0, 45.0, 60.0)).score, 8.0);
  EXPECT_EQ(score(make_metrics(0.0, 30.0, 25.0)).score, 0.0);
  const auto s = score(make_metrics(5.0, 20.0, 10.0));
  EXPECT_EQ(s.transaction_penalty, 10.0);
  EXPECT_EQ(s.capital_penalty, 7.5);
}

TEST(Score, EqualsComponents) {
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    const auto s = score(make_metrics(rng.uniform(-50, 50), rng.uniform(0, 80), rng.uniform(0, 100)));
    EXPECT_EQ(s.score, s.monthly_return - s.transaction_penalty - s.capital_penalty);
  }
}

TEST(Significance, InclusiveBoundary) {
  EXPECT_FALSE(significance_flag(make_metrics(0.0, 4.9, 0.0)));
  EXPECT_TRUE(significance_flag(make_metrics(0.0, 5.0, 0.0)));
}
