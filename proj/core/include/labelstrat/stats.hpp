#pragma once

#include <optional>
#include <span>
#include <vector>

namespace labelstrat {

double mean(std::span<const double> values);

/// Sample (n-1) standard deviation; 0 for fewer than two values.
double sample_stddev(std::span<const double> values);

/// Ranks starting at 1; tied values share their average rank.
std::vector<double> average_ranks(std::span<const double> values);

/// Pearson correlation, or nullopt when either side has zero variance or n < 2.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

}  // namespace labelstrat
