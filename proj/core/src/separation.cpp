#include "labelstrat/separation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include <fmt/format.h>

#include "labelstrat/error.hpp"
#include "labelstrat/parallel.hpp"
#include "labelstrat/rng.hpp"

namespace labelstrat {

namespace {

constexpr std::array<std::pair<int, int>, 3> kPairs{{{0, 1}, {0, 2}, {1, 2}}};

}  // namespace

std::uint64_t DistanceHistogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

double WeightFunction::operator()(double d) const {
  if (!(cutoff > 0.0)) return d <= 0.0 ? 1.0 : 0.0;
  return std::max(0.0, 1.0 - d / cutoff);
}

std::array<std::vector<std::size_t>, 3> eligible_bars(const LabelSeries& labels,
                                                      std::size_t first_bar,
                                                      std::size_t end_bar) {
  std::array<std::vector<std::size_t>, 3> out;
  end_bar = std::min(end_bar, labels.size());
  for (std::size_t i = first_bar; i < end_bar; ++i) {
    if (labels.valid[i]) out[labels.cls[i]].push_back(i);
  }
  return out;
}

std::array<std::vector<std::size_t>, 3> sample_class_bars(
    const std::array<std::vector<std::size_t>, 3>& eligible, std::size_t n_per_class,
    std::uint64_t seed) {
  std::array<std::vector<std::size_t>, 3> out;
  for (std::size_t c = 0; c < 3; ++c) {
    std::vector<std::size_t> perm = eligible[c];
    Rng rng(derive_seed(seed, c));
    // Partial Fisher-Yates: the first k slots are a uniform sample without replacement.
    const std::size_t k = std::min(n_per_class, perm.size());
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(perm.size() - i));
      std::swap(perm[i], perm[j]);
    }
    perm.resize(k);
    out[c] = std::move(perm);
  }
  return out;
}

ClassDistances class_distances(const FeatureMatrix& matrix,
                               const std::array<std::vector<std::size_t>, 3>& bars_by_class,
                               int bins) {
  if (bins < 1) throw ValidationError("histogram needs at least one bin");
  ClassDistances out;
  const std::size_t dim = matrix.cols();
  const double d_max = 2.0 * static_cast<double>(dim);
  const double scale = static_cast<double>(bins) / d_max;

  std::array<std::vector<double>, 3> rows;
  for (std::size_t c = 0; c < 3; ++c) {
    out.sampled[c] = bars_by_class[c].size();
    rows[c].reserve(bars_by_class[c].size() * dim);
    for (std::size_t bar : bars_by_class[c]) {
      const auto row = matrix.row_for_bar(bar);
      if (!row) throw std::out_of_range(fmt::format("bar {} has no feature row", bar));
      rows[c].insert(rows[c].end(), row->begin(), row->end());
    }
    if (bars_by_class[c].empty()) out.degenerate = true;
  }

  for (std::size_t p = 0; p < kPairs.size(); ++p) {
    const auto [a, b] = kPairs[p];
    DistanceHistogram& h = out.pairs[p];
    h.class_a = a;
    h.class_b = b;
    h.d_max = d_max;
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    h.n_a = bars_by_class[a].size();
    h.n_b = bars_by_class[b].size();
    const double* xa = rows[a].data();
    const double* xb = rows[b].data();
    for (std::size_t i = 0; i < h.n_a; ++i) {
      const double* u = xa + i * dim;
      for (std::size_t j = 0; j < h.n_b; ++j) {
        const double* v = xb + j * dim;
        double d = 0.0;
        for (std::size_t k = 0; k < dim; ++k) d += std::abs(u[k] - v[k]);
        const auto bin = std::min(static_cast<std::size_t>(d * scale),
                                  static_cast<std::size_t>(bins - 1));
        ++h.counts[bin];
      }
    }
  }
  return out;
}

ClassDistances cross_class_distances(const FeatureMatrix& matrix, const LabelSeries& labels,
                                     const DistanceOptions& options) {
  const auto eligible =
      eligible_bars(labels, matrix.first_bar(), matrix.first_bar() + matrix.rows());
  const auto sample = sample_class_bars(eligible, options.n_per_class, options.seed);
  ClassDistances out = class_distances(matrix, sample, options.bins);
  for (std::size_t c = 0; c < 3; ++c) out.available[c] = eligible[c].size();
  return out;
}

double separation_power(std::span<const DistanceHistogram> histograms, const WeightFunction& weight,
                        double power_cap) {
  if (histograms.empty()) throw std::invalid_argument("no histograms");
  double area = 0.0;
  for (const auto& h : histograms) {
    const std::uint64_t total = h.total();
    if (total == 0) throw std::invalid_argument("empty distance histogram");
    double pair_area = 0.0;
    for (std::size_t bin = 0; bin < h.counts.size(); ++bin) {
      if (h.counts[bin] == 0) continue;
      pair_area += weight(h.bin_lower_edge(bin)) * static_cast<double>(h.counts[bin]);
    }
    area += pair_area / static_cast<double>(total);
  }
  if (!(area > 0.0)) return power_cap;
  return std::min(1.0 / area, power_cap);
}

SeparationReport separation_report(const FeatureMatrix& matrix, const LabelSeries& labels,
                                   const DistanceOptions& options, const WeightFunction& weight,
                                   double power_cap) {
  SeparationReport report;
  report.distances = cross_class_distances(matrix, labels, options);
  report.weight = weight;
  report.power_cap = power_cap;
  if (!report.distances.degenerate) {
    report.power = separation_power(report.distances.pairs, weight, power_cap);
  }
  return report;
}

std::vector<FeatureSpec> make_specs(const FeatureSpace& space, std::span<const int> params) {
  if (params.size() != space.size()) throw std::invalid_argument("one parameter per slot expected");
  std::vector<FeatureSpec> specs;
  specs.reserve(space.size());
  for (std::size_t s = 0; s < space.size(); ++s) {
    specs.push_back(FeatureSpec{space[s].family, params[s], space[s].range, space[s].norm_window});
  }
  return specs;
}

namespace {

std::vector<std::vector<int>> draw_candidates(const FeatureSpace& space, std::size_t budget,
                                              std::uint64_t seed) {
  std::vector<std::vector<int>> out;
  const std::size_t cardinality = space_cardinality(space);
  if (budget >= cardinality) {
    // Enumerate in odometer order, last slot fastest.
    out.reserve(cardinality);
    std::vector<int> current;
    for (const auto& slot : space) current.push_back(slot.range.lo);
    for (std::size_t n = 0; n < cardinality; ++n) {
      out.push_back(current);
      for (std::size_t s = space.size(); s-- > 0;) {
        if (current[s] < space[s].range.hi) {
          ++current[s];
          break;
        }
        current[s] = space[s].range.lo;
      }
    }
    return out;
  }
  Rng rng(derive_seed(seed, 0xFEA7));
  std::set<std::vector<int>> seen;
  for (std::size_t n = 0; n < budget; ++n) {
    std::vector<int> params;
    params.reserve(space.size());
    for (const auto& slot : space) {
      params.push_back(static_cast<int>(rng.uniform_int(slot.range.lo, slot.range.hi)));
    }
    if (seen.insert(params).second) out.push_back(std::move(params));
  }
  return out;
}

}  // namespace

FeatureSearchResult search_feature_set(std::span<const Bar> bars, const FeatureSpace& space,
                                       const LabelSeries& labels,
                                       const FeatureSearchOptions& options) {
  if (space.empty()) throw ValidationError("feature space is empty");
  if (options.budget < 1) throw ValidationError("feature search budget must be at least 1");
  if (!(options.eta > 1.0)) throw ValidationError("eta must exceed 1");
  if (labels.size() != bars.size()) throw ValidationError("labels and bars are misaligned");

  // Every candidate sees the same bars: eligibility uses the space-wide warm-up.
  const std::size_t first_bar = max_warmup(space);
  const auto eligible = eligible_bars(labels, first_bar, bars.size());

  const std::size_t n_max = std::max<std::size_t>(options.n_per_class, 1);
  const std::size_t n_min = std::clamp<std::size_t>(options.min_per_class, 1, n_max);
  int rungs = 1;
  while (static_cast<double>(n_max) / std::pow(options.eta, rungs) >= static_cast<double>(n_min)) {
    ++rungs;
  }
  const auto full_sample = sample_class_bars(eligible, n_max, options.seed);

  auto candidates = draw_candidates(space, options.budget, options.seed);
  FeatureSearchResult result;
  result.candidates.resize(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) result.candidates[i].params = candidates[i];
  if (candidates.size() == 1) rungs = 1;
  result.rungs = rungs;

  std::vector<std::size_t> alive(candidates.size());
  std::iota(alive.begin(), alive.end(), 0);
  for (int rung = 0; rung < rungs; ++rung) {
    const double shrink = std::pow(options.eta, rungs - 1 - rung);
    const auto n_rung = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(static_cast<double>(n_max) / shrink)));
    std::array<std::vector<std::size_t>, 3> sample;
    for (std::size_t c = 0; c < 3; ++c) {
      sample[c].assign(full_sample[c].begin(),
                       full_sample[c].begin() +
                           static_cast<std::ptrdiff_t>(std::min(n_rung, full_sample[c].size())));
    }
    parallel_for(alive.size(), options.workers, [&](std::size_t k) {
      CandidateResult& cand = result.candidates[alive[k]];
      const auto specs = make_specs(space, cand.params);
      const auto matrix = feature_matrix(bars, specs, first_bar);
      const auto distances = class_distances(matrix, sample, options.bins);
      cand.rung = rung;
      cand.degenerate = distances.degenerate;
      cand.power = cand.degenerate
                       ? 0.0
                       : separation_power(distances.pairs, options.weight, options.power_cap);
    });
    std::stable_sort(alive.begin(), alive.end(), [&](std::size_t a, std::size_t b) {
      const auto& ca = result.candidates[a];
      const auto& cb = result.candidates[b];
      if (ca.degenerate != cb.degenerate) return !ca.degenerate;
      if (ca.power != cb.power) return ca.power > cb.power;
      return a < b;
    });
    if (rung + 1 < rungs) {
      const auto keep = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::ceil(static_cast<double>(alive.size()) / options.eta)));
      alive.resize(std::min(keep, alive.size()));
    }
  }

  const CandidateResult& winner = result.candidates[alive.front()];
  if (winner.degenerate) {
    throw std::runtime_error(
        fmt::format("feature search: all {} candidates are degenerate (class counts {}/{}/{})",
                    candidates.size(), eligible[0].size(), eligible[1].size(), eligible[2].size()));
  }
  result.chosen = make_specs(space, winner.params);
  const auto matrix = feature_matrix(bars, result.chosen, first_bar);
  result.report.distances = class_distances(matrix, full_sample, options.bins);
  for (std::size_t c = 0; c < 3; ++c) result.report.distances.available[c] = eligible[c].size();
  result.report.weight = options.weight;
  result.report.power_cap = options.power_cap;
  result.report.power =
      separation_power(result.report.distances.pairs, options.weight, options.power_cap);
  return result;
}

FeatureSearchResult search_feature_set(std::span<const Bar> bars, const FeatureSpace& space,
                                       const LabelSpec& label,
                                       const FeatureSearchOptions& options) {
  return search_feature_set(bars, space, compute_labels(bars, label), options);
}

}  // namespace labelstrat
