#include <gtest/gtest.h>

#include "labelstrat/error.hpp"
#include "labelstrat/search_ensemble.hpp"
#include "labelstrat/stats.hpp"
#include "support.hpp"

using namespace labelstrat;
using labelstrat::testing::random_walk_bars;
using labelstrat::testing::TempDir;

namespace {

/// Smoothly wandering probability pairs per label so strategies actually trade.
SignalInputs wandering_inputs(std::size_t rows, std::size_t labels, std::uint64_t seed) {
  Rng rng(seed);
  SignalInputs in{2 * labels, {}};
  std::vector<double> state(2 * labels, 0.3);
  for (std::size_t r = 0; r < rows; ++r) {
    for (auto& s : state) {
      s = std::clamp(s + 0.05 * rng.normal(), 0.0, 0.5);
      in.values.push_back(s);
    }
  }
  return in;
}

StrategySpace two_label_space() {
  StrategySpace space;
  space.label_count = 2;
  return space;
}

StrategyRecord fixed_record(std::size_t id, std::vector<double> weights) {
  StrategyRecord r;
  r.id = id;
  r.params = StrategyParams{std::move(weights), 0.75, 0.25, 0.05};
  return r;
}

}  // namespace

TEST(Sample, WithinBoundsAndRoughlyUniform) {
  const auto space = two_label_space();
  double mean_buy = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const auto p = sample_strategy(space, derive_seed(5, static_cast<std::uint64_t>(i)));
    ASSERT_EQ(p.weights.size(), 4u);
    for (double w : p.weights) {
      EXPECT_GE(w, -1.0);
      EXPECT_LE(w, 1.0);
    }
    EXPECT_GE(p.y_buy, 0.7);
    EXPECT_LE(p.y_buy, 1.0);
    EXPECT_LE(p.y_sell, 0.3);
    EXPECT_GE(p.y_width, 0.02);
    EXPECT_LE(p.y_width, 0.1);
    EXPECT_NO_THROW(validate(p, space));
    mean_buy += p.y_buy;
  }
  EXPECT_NEAR(mean_buy / n, 0.85, 0.005);
}

TEST(Search, DeterministicAndRanked) {
  const auto bars = random_walk_bars(6000, 21);
  const auto inputs = wandering_inputs(bars.size(), 2, 22);
  StrategySearchOptions opts;
  opts.budget = 60;
  opts.rungs = 2;
  opts.seed = 9;
  const auto a = search_strategies(two_label_space(), bars, inputs, opts);
  opts.workers = 3;
  const auto b = search_strategies(two_label_space(), bars, inputs, opts);
  ASSERT_EQ(a.size(), 60u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].id, b[i].id);
    EXPECT_EQ(a[i].score.score, b[i].score.score);
    if (i > 0) EXPECT_TRUE(ranks_before(a[i - 1], a[i]));
  }
  const auto survivors = std::count_if(a.begin(), a.end(), [](const auto& r) { return r.rung == 1; });
  EXPECT_EQ(survivors, 20);
  EXPECT_EQ(a.front().past_bars, 6000u);
  EXPECT_EQ(a.back().past_bars, 2000u);
}

TEST(Search, OneRungScoresEveryoneOnFullPast) {
  const auto bars = random_walk_bars(3000, 23);
  const auto inputs = wandering_inputs(bars.size(), 2, 24);
  StrategySearchOptions opts;
  opts.budget = 15;
  opts.rungs = 1;
  const auto records = search_strategies(two_label_space(), bars, inputs, opts);
  for (const auto& r : records) {
    EXPECT_EQ(r.past_bars, 3000u);
    EXPECT_EQ(r.rung, 0);
    EXPECT_EQ(r.score.score, score(r.past).score);
  }
}

TEST(Search, RejectsMisalignedInputs) {
  const auto bars = random_walk_bars(100, 25);
  StrategySearchOptions opts;
  EXPECT_THROW(search_strategies(two_label_space(), bars, wandering_inputs(99, 2, 1), opts),
               ValidationError);
  EXPECT_THROW(search_strategies(two_label_space(), bars, wandering_inputs(100, 1, 1), opts),
               ValidationError);
}

TEST(Ensemble, MeanOfAlwaysInAndAlwaysOut) {
  const auto bars = random_walk_bars(500, 26);
  SignalInputs in{2, {}};
  for (std::size_t i = 0; i < bars.size(); ++i) {
    in.values.push_back(1.0);
    in.values.push_back(0.0);
  }
  const std::vector<StrategyRecord> ranked{fixed_record(0, {1.0, -1.0}),
                                           fixed_record(1, {-1.0, 1.0})};
  const auto e = build_ensemble(ranked, 2, bars, in, 0.0);
  for (double p : e.positions) EXPECT_EQ(p, 0.5);
  const auto single = build_ensemble(ranked, 1, bars, in, 0.0);
  for (double p : single.positions) EXPECT_EQ(p, 1.0);
  EXPECT_EQ(single.members, (std::vector<std::size_t>{0}));
  EXPECT_THROW(build_ensemble(ranked, 3, bars, in, 0.0), ValidationError);
}

TEST(Ensemble, TopKNestingAndRiskAdjustment) {
  const auto past = random_walk_bars(4000, 27);
  const auto future = random_walk_bars(4000, 28);
  StrategySearchOptions opts;
  opts.budget = 40;
  auto records = search_strategies(two_label_space(), past, wandering_inputs(4000, 2, 29), opts);
  const auto future_inputs = wandering_inputs(4000, 2, 30);
  evaluate_future(records, future, future_inputs, kDefaultFeeRate);
  std::vector<std::size_t> previous;
  for (std::size_t k : {5u, 10u, 20u}) {
    const auto e = build_ensemble(records, k, future, future_inputs, kDefaultFeeRate);
    EXPECT_TRUE(std::equal(previous.begin(), previous.end(), e.members.begin()));
    previous = e.members;
    if (!e.risk_adjusted_returns.empty()) {
      EXPECT_NEAR(sample_stddev(e.risk_adjusted_returns), e.benchmark_volatility, 1e-9);
    }
  }
}

TEST(RiskAdjust, MatchesBenchmarkSigma) {
  Rng rng(31);
  std::vector<double> ens(1000), bench(1000);
  for (std::size_t i = 0; i < ens.size(); ++i) {
    ens[i] = 0.002 * rng.normal();
    bench[i] = 0.01 * rng.normal();
  }
  const auto adj = risk_adjust(ens, bench);
  EXPECT_NEAR(sample_stddev(adj), sample_stddev(bench), 1e-9);
  EXPECT_THROW(risk_adjust(std::vector<double>(10, 0.01), std::vector<double>(10, 0.0)),
               std::invalid_argument);
  EXPECT_THROW(risk_adjust(ens, std::vector<double>(5)), std::invalid_argument);
}

TEST(Benchmark, FirstReturnFromOpen) {
  const auto bars = random_walk_bars(10, 32);
  const auto r = benchmark_returns(bars);
  EXPECT_DOUBLE_EQ(r[0], bars[0].close / bars[0].open - 1.0);
  EXPECT_DOUBLE_EQ(r[5], bars[5].close / bars[4].close - 1.0);
}

namespace {

StrategyRecord report_record(std::size_t id, double past_mr, double past_score, double future_mr,
                             bool significant) {
  StrategyRecord r;
  r.id = id;
  r.past.monthly_return = past_mr;
  r.score.score = past_score;
  r.future = BacktestMetrics{};
  r.future->monthly_return = future_mr;
  r.significant = significant;
  return r;
}

}  // namespace

TEST(Report, CorrelationsAndFlags) {
  std::vector<StrategyRecord> records{
      report_record(0, 1.0, 3.0, 2.0, true), report_record(1, 2.0, 1.0, 4.0, true),
      report_record(2, 3.0, 2.0, 6.0, true), report_record(3, 9.0, 9.0, -9.0, false)};
  const auto rep = cross_dataset_report(records);
  EXPECT_EQ(rep.significant_count, 3u);
  EXPECT_NEAR(*rep.return_spearman.value, 1.0, 1e-12);
  EXPECT_NEAR(*rep.return_pearson.value, 1.0, 1e-12);
  EXPECT_NEAR(*rep.score_spearman.value, -0.5, 1e-12);
  EXPECT_EQ(rep.returns_table.size(), 4u);

  const auto one = cross_dataset_report(std::span(records).first(1));
  EXPECT_TRUE(one.score_spearman.undefined);
  EXPECT_FALSE(one.score_spearman.value.has_value());

  std::vector<StrategyRecord> flat{report_record(0, 1.0, 1.0, 2.0, true),
                                   report_record(1, 1.0, 1.0, 3.0, true)};
  const auto deg = cross_dataset_report(flat);
  EXPECT_TRUE(deg.score_spearman.degenerate);
  EXPECT_EQ(deg.score_spearman.value, 0.0);
}

TEST(Records, JsonlRoundTrip) {
  const auto bars = random_walk_bars(2000, 33);
  const auto inputs = wandering_inputs(bars.size(), 2, 34);
  StrategySearchOptions opts;
  opts.budget = 8;
  auto records = search_strategies(two_label_space(), bars, inputs, opts);
  evaluate_future(records, bars, inputs, kDefaultFeeRate);
  TempDir dir("records");
  write_records_jsonl(dir / "r.jsonl", records);
  const auto back = read_records_jsonl(dir / "r.jsonl");
  ASSERT_EQ(back.size(), records.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].id, records[i].id);
    EXPECT_EQ(back[i].params.weights, records[i].params.weights);
    EXPECT_EQ(back[i].params.y_width, records[i].params.y_width);
    EXPECT_EQ(back[i].score.score, records[i].score.score);
    EXPECT_EQ(back[i].significant, records[i].significant);
    ASSERT_TRUE(back[i].future.has_value());
    EXPECT_EQ(back[i].future->monthly_return, records[i].future->monthly_return);
  }
}
