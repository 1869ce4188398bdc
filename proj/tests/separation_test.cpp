#include <gtest/gtest.h>

#include <numeric>

#include "labelstrat/error.hpp"
#include "labelstrat/separation.hpp"
#include "support.hpp"

using namespace labelstrat;
using labelstrat::testing::gaussian_classes;
using labelstrat::testing::random_walk_bars;
using labelstrat::testing::toy_labels;

namespace {

FeatureMatrix constant_matrix(std::size_t rows, std::vector<double> row) {
  std::vector<double> values;
  for (std::size_t r = 0; r < rows; ++r) values.insert(values.end(), row.begin(), row.end());
  return FeatureMatrix(std::vector<FeatureSpec>(row.size()), 0, rows, std::move(values));
}

LabelSeries cycling_labels(std::size_t n) {
  LabelSeries s;
  for (std::size_t i = 0; i < n; ++i) {
    s.cls.push_back(static_cast<std::uint8_t>(i % 3));
    s.continuous.push_back(static_cast<double>(i % 3));
    s.valid.push_back(1);
  }
  return s;
}

std::array<std::vector<std::size_t>, 3> all_bars(const LabelSeries& labels) {
  return eligible_bars(labels, 0, labels.size());
}

const FeatureSpace kToySpace{{FeatureFamily::vwap_minus_sma, {2, 10}, 0},
                             {FeatureFamily::vwap_minus_sma, {30, 60}, 0}};

}  // namespace

TEST(Distances, FullSampleGivesNineMillionPairs) {
  Rng rng(1);
  std::vector<double> values(9000);
  for (auto& v : values) v = rng.uniform(-1.0, 1.0);
  const FeatureMatrix m(std::vector<FeatureSpec>(1), 0, 9000, values);
  const auto d = cross_class_distances(m, cycling_labels(9000), DistanceOptions{3000, 7, 256});
  for (const auto& h : d.pairs) {
    EXPECT_EQ(h.total(), 9'000'000u);
    EXPECT_EQ(h.n_a * h.n_b, 9'000'000u);
  }
}

TEST(Distances, IdenticalVectorsAreAllZero) {
  const auto d = class_distances(constant_matrix(30, {0.3, -0.2}), all_bars(cycling_labels(30)));
  for (const auto& h : d.pairs) EXPECT_EQ(h.counts[0], h.total());
  EXPECT_NEAR(separation_power(d.pairs, WeightFunction{3.0}), 1.0 / 3.0, 1e-15);
}

TEST(Distances, OppositeScalarClassesAreTwoApart) {
  LabelSeries labels;
  std::vector<double> values;
  for (int i = 0; i < 20; ++i) {
    const bool buy = i % 2 == 0;
    values.push_back(buy ? 1.0 : -1.0);
    labels.cls.push_back(buy ? kBuy : kSell);
    labels.continuous.push_back(buy ? 0.0 : 2.0);
    labels.valid.push_back(1);
  }
  const FeatureMatrix m(std::vector<FeatureSpec>(1), 0, 20, values);
  const auto d = class_distances(m, all_bars(labels));
  EXPECT_TRUE(d.degenerate);  // no neutral class
  const auto& h02 = d.pairs[1];
  ASSERT_EQ(h02.class_a, 0);
  ASSERT_EQ(h02.class_b, 2);
  EXPECT_EQ(h02.total(), 100u);
  EXPECT_EQ(h02.counts.back(), 100u);  // d = 2 = d_max lands in the top bin
  EXPECT_DOUBLE_EQ(h02.d_max, 2.0);
}

TEST(Power, AllMassBeyondCutoffIsCapped) {
  DistanceHistogram h;
  h.d_max = 8.0;
  h.counts.assign(256, 0);
  h.counts[200] = 10;  // lower edge 6.25 > 3
  const std::vector<DistanceHistogram> hs{h, h, h};
  EXPECT_EQ(separation_power(hs, WeightFunction{3.0}, 1e6), 1e6);
  EXPECT_EQ(separation_power(hs, WeightFunction{3.0}, 123.0), 123.0);
  DistanceHistogram empty = h;
  empty.counts.assign(256, 0);
  EXPECT_THROW(separation_power(std::vector<DistanceHistogram>{empty}, WeightFunction{}), std::invalid_argument);
}

TEST(Power, WeightIsTriangularWithCutoff) {
  const WeightFunction w{3.0};
  EXPECT_EQ(w(0.0), 1.0);
  EXPECT_DOUBLE_EQ(w(1.5), 0.5);
  EXPECT_EQ(w(3.0), 0.0);
  EXPECT_EQ(w(10.0), 0.0);
}

TEST(Power, RecomputesExactlyFromReportHistograms) {
  const auto bars = random_walk_bars(4000, 31);
  const auto labels = toy_labels(bars);
  const std::vector<FeatureSpec> specs{{FeatureFamily::vwap_minus_sma, 5, {5, 5}, 0},
                                       {FeatureFamily::vwap_minus_sma, 50, {50, 50}, 0}};
  const auto report = separation_report(feature_matrix(bars, specs), labels,
                                        DistanceOptions{200, 3, 256}, WeightFunction{3.0});
  ASSERT_FALSE(report.distances.degenerate);
  EXPECT_GT(report.power, 0.0);
  EXPECT_EQ(report.power, separation_power(report.distances.pairs, report.weight, report.power_cap));
}

TEST(Power, IncreasesWithClassSeparation) {
  double previous = 0.0;
  for (double sep : {0.0, 1.0, 2.0, 3.0, 4.0}) {
    const auto pts = gaussian_classes(300, sep, 0.15, 77);
    const auto d = class_distances(pts.matrix, all_bars(pts.labels));
    const std::vector<DistanceHistogram> h02{d.pairs[1]};
    const double power = separation_power(h02, WeightFunction{3.0});
    EXPECT_GT(power, previous) << sep;
    previous = power;
  }
}

TEST(Power, RobustToBinRefinementOnSmoothData) {
  Rng rng(8);
  std::vector<double> values;
  for (int i = 0; i < 1800 * 4; ++i) values.push_back(std::clamp(0.4 * rng.normal(), -1.0, 1.0));
  const FeatureMatrix m(std::vector<FeatureSpec>(4), 0, 1800, values);
  const auto bars = all_bars(cycling_labels(1800));
  const double coarse = separation_power(class_distances(m, bars, 256).pairs, WeightFunction{3.0});
  const double fine = separation_power(class_distances(m, bars, 512).pairs, WeightFunction{3.0});
  EXPECT_LT(std::abs(coarse - fine) / fine, 0.01);
}

TEST(Power, RightSkewedHistogramsScoreHigher) {
  // same mass, set one shifted right by a few bins in every pair
  std::vector<DistanceHistogram> one(3);
  std::vector<DistanceHistogram> two(3);
  for (std::size_t p = 0; p < 3; ++p) {
    for (auto* h : {&one[p], &two[p]}) {
      h->d_max = 4.0;
      h->counts.assign(256, 0);
    }
    for (std::size_t b = 20; b < 120; ++b) {
      const auto mass = static_cast<std::uint64_t>(100 - std::abs(static_cast<int>(b) - 70));
      two[p].counts[b] = mass;
      one[p].counts[b + 8] = mass;
    }
  }
  EXPECT_GT(separation_power(one, WeightFunction{3.0}), separation_power(two, WeightFunction{3.0}));
}

TEST(Sampling, NestedPrefixesAndSwapSymmetry) {
  const auto labels = cycling_labels(900);
  const auto eligible = all_bars(labels);
  const auto small = sample_class_bars(eligible, 50, 5);
  const auto large = sample_class_bars(eligible, 200, 5);
  for (std::size_t c = 0; c < 3; ++c) {
    ASSERT_EQ(small[c].size(), 50u);
    for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(small[c][i], large[c][i]);
  }
  Rng rng(3);
  std::vector<double> values(900 * 2);
  for (auto& v : values) v = rng.uniform(-1.0, 1.0);
  const FeatureMatrix m(std::vector<FeatureSpec>(2), 0, 900, values);
  const auto d = class_distances(m, large);
  auto swapped = large;
  std::swap(swapped[0], swapped[2]);
  const auto e = class_distances(m, swapped);
  EXPECT_EQ(d.pairs[1].counts, e.pairs[1].counts);
  EXPECT_EQ(d.pairs[0].counts, e.pairs[2].counts);
  EXPECT_EQ(d.pairs[2].counts, e.pairs[0].counts);
}

TEST(Sampling, TranslatingAClassAwayRaisesMeanDistance) {
  auto pts = gaussian_classes(200, 1.0, 0.1, 5);
  const auto mean_distance = [](const FeatureMatrix& m, const LabelSeries& l) {
    const auto d = class_distances(m, eligible_bars(l, 0, l.size()), 1024);
    const auto& h = d.pairs[1];
    double s = 0.0;
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
      s += (h.bin_lower_edge(b) + 0.5 * h.bin_width()) * static_cast<double>(h.counts[b]);
    }
    return s / static_cast<double>(h.total());
  };
  const double before = mean_distance(pts.matrix, pts.labels);
  std::vector<double> moved(pts.matrix.values().begin(), pts.matrix.values().end());
  for (std::size_t r = 0; r < pts.matrix.rows(); ++r) {
    if (pts.labels.cls[r] == kBuy) moved[2 * r] = std::min(1.0, moved[2 * r] + 0.3);
  }
  const FeatureMatrix shifted(std::vector<FeatureSpec>(2), 0, pts.matrix.rows(), moved);
  EXPECT_GE(mean_distance(shifted, pts.labels), before);
}

TEST(Search, BudgetOneReturnsTheSampledCandidate) {
  const auto bars = random_walk_bars(3000, 41);
  const auto labels = toy_labels(bars);
  FeatureSearchOptions opts;
  opts.budget = 1;
  opts.seed = 17;
  const auto result = search_feature_set(bars, kToySpace, labels, opts);
  ASSERT_EQ(result.candidates.size(), 1u);
  EXPECT_EQ(result.rungs, 1);
  EXPECT_EQ(result.chosen[0].param, result.candidates[0].params[0]);
  EXPECT_EQ(result.chosen[1].param, result.candidates[0].params[1]);
}

TEST(Search, DeterministicAcrossRunsAndWorkers) {
  const auto bars = random_walk_bars(4000, 42);
  const auto labels = toy_labels(bars);
  FeatureSearchOptions opts;
  opts.budget = 20;
  opts.n_per_class = 150;
  opts.min_per_class = 50;
  opts.seed = 99;
  const auto a = search_feature_set(bars, kToySpace, labels, opts);
  opts.workers = 3;
  const auto b = search_feature_set(bars, kToySpace, labels, opts);
  EXPECT_EQ(a.chosen[0].param, b.chosen[0].param);
  EXPECT_EQ(a.chosen[1].param, b.chosen[1].param);
  EXPECT_EQ(a.report.power, b.report.power);
  ASSERT_EQ(a.candidates.size(), b.candidates.size());
  for (std::size_t i = 0; i < a.candidates.size(); ++i) {
    EXPECT_EQ(a.candidates[i].power, b.candidates[i].power);
  }
}

TEST(Search, ExhaustiveAndHalvingAgreeOnToySpace) {
  const auto bars = random_walk_bars(6000, 404);
  const auto labels = toy_labels(bars);
  FeatureSearchOptions exhaustive;
  exhaustive.budget = 279;
  exhaustive.n_per_class = 300;
  exhaustive.min_per_class = 300;
  exhaustive.seed = 12;
  FeatureSearchOptions halving = exhaustive;
  halving.min_per_class = 100;
  const auto a = search_feature_set(bars, kToySpace, labels, exhaustive);
  const auto b = search_feature_set(bars, kToySpace, labels, halving);
  EXPECT_EQ(a.rungs, 1);
  EXPECT_EQ(b.rungs, 2);
  EXPECT_EQ(a.candidates.size(), 279u);
  EXPECT_EQ(a.chosen[0].param, b.chosen[0].param);
  EXPECT_EQ(a.chosen[1].param, b.chosen[1].param);
  EXPECT_EQ(a.report.power, b.report.power);
}

TEST(Search, DegenerateLabelsFailExplicitly) {
  const auto bars = random_walk_bars(2000, 43);
  LabelSeries labels;
  labels.cls.assign(bars.size(), kNeutral);
  labels.continuous.assign(bars.size(), 1.0);
  labels.valid.assign(bars.size(), 1);
  FeatureSearchOptions opts;
  opts.budget = 3;
  EXPECT_THROW(search_feature_set(bars, kToySpace, labels, opts), std::runtime_error);
}
