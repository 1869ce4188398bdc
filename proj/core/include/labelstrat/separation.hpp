#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "labelstrat/features.hpp"
#include "labelstrat/labels.hpp"

namespace labelstrat {

/// Histogram of L1 distances between feature vectors of two label classes.
struct DistanceHistogram {
  int class_a = 0;
  int class_b = 1;
  double d_max = 0.0;
  std::vector<std::uint64_t> counts;  // uniform bins over [0, d_max]
  std::size_t n_a = 0;
  std::size_t n_b = 0;

  double bin_width() const { return d_max / static_cast<double>(counts.size()); }
  double bin_lower_edge(std::size_t bin) const { return bin_width() * static_cast<double>(bin); }
  std::uint64_t total() const;
};

/// w(d) = max(0, 1 - d / cutoff): emphasises near-zero distances.
struct WeightFunction {
  double cutoff = 3.0;
  double operator()(double d) const;
};

struct DistanceOptions {
  std::size_t n_per_class = 3000;
  std::uint64_t seed = 0;
  int bins = 256;
};

/// Histograms for the unordered class pairs (0,1), (0,2), (1,2).
struct ClassDistances {
  std::array<DistanceHistogram, 3> pairs;
  std::array<std::size_t, 3> available{};  // eligible bars per class
  std::array<std::size_t, 3> sampled{};
  bool degenerate = false;  // some class had no eligible bar
};

/// Bars eligible for distance sampling, grouped by class, in bar order.
/// A bar is eligible when it has a feature row at or after `first_bar` and a valid label.
std::array<std::vector<std::size_t>, 3> eligible_bars(const LabelSeries& labels,
                                                      std::size_t first_bar,
                                                      std::size_t end_bar);

/// Per-class sample: a seeded permutation of the eligible bars truncated to n.
/// Prefixes are nested, so smaller n gives a subset of larger n under one seed.
std::array<std::vector<std::size_t>, 3> sample_class_bars(
    const std::array<std::vector<std::size_t>, 3>& eligible, std::size_t n_per_class,
    std::uint64_t seed);

/// All cross-class L1 distances of the given bars, binned over [0, 2 * cols].
ClassDistances class_distances(const FeatureMatrix& matrix,
                               const std::array<std::vector<std::size_t>, 3>& bars_by_class,
                               int bins = 256);

/// Samples up to n_per_class valid bars per class without replacement and bins the
/// cross-class distances. Classes with fewer bars are used whole (shortfall recorded).
ClassDistances cross_class_distances(const FeatureMatrix& matrix, const LabelSeries& labels,
                                     const DistanceOptions& options);

inline constexpr double kDefaultPowerCap = 1e6;

/// 1 / sum over pairs and bins of w(lower bin edge) * normalised frequency.
/// A zero weighted area returns `power_cap`. Empty histograms are rejected.
double separation_power(std::span<const DistanceHistogram> histograms, const WeightFunction& weight,
                        double power_cap = kDefaultPowerCap);

struct SeparationReport {
  ClassDistances distances;
  double power = 0.0;  // 0 when degenerate
  WeightFunction weight;
  double power_cap = kDefaultPowerCap;
};

SeparationReport separation_report(const FeatureMatrix& matrix, const LabelSeries& labels,
                                   const DistanceOptions& options, const WeightFunction& weight,
                                   double power_cap = kDefaultPowerCap);

struct FeatureSearchOptions {
  std::size_t budget = 27;           // candidate assignments drawn
  std::size_t n_per_class = 300;     // per-class sample at the final rung
  std::size_t min_per_class = 100;   // per-class sample at the first rung
  double eta = 3.0;                  // keep 1/eta of the candidates per rung
  std::uint64_t seed = 0;
  int bins = 256;
  WeightFunction weight;
  double power_cap = kDefaultPowerCap;
  int workers = 1;
};

struct CandidateResult {
  std::vector<int> params;  // one per slot
  double power = 0.0;       // at the last rung reached; 0 when degenerate
  bool degenerate = false;
  int rung = 0;
};

struct FeatureSearchResult {
  std::vector<FeatureSpec> chosen;
  SeparationReport report;  // winner at the final rung
  std::vector<CandidateResult> candidates;
  int rungs = 1;
};

/// Successive-halving random search for the slot parameters maximising
/// separation power. With budget >= the space cardinality every assignment is
/// enumerated once. Deterministic in (seed, budget, space, data) regardless of
/// the worker count. Throws std::runtime_error when every candidate is degenerate.
FeatureSearchResult search_feature_set(std::span<const Bar> bars, const FeatureSpace& space,
                                       const LabelSeries& labels,
                                       const FeatureSearchOptions& options);

FeatureSearchResult search_feature_set(std::span<const Bar> bars, const FeatureSpace& space,
                                       const LabelSpec& label,
                                       const FeatureSearchOptions& options);

/// Instantiates slot parameters as concrete specs.
std::vector<FeatureSpec> make_specs(const FeatureSpace& space, std::span<const int> params);

}  // namespace labelstrat
