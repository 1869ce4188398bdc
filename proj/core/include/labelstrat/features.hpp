#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "labelstrat/ingest.hpp"

namespace labelstrat {

enum class FeatureFamily {
  vwap_minus_sma,          // vwap - SMA(vwap, X)
  vwap_minus_ema,          // vwap - EMA(vwap, X)
  momentum,                // vwap[i] / vwap[i - X] - 1
  realized_vol,            // sample std of 1-minute log returns over X bars
  volume_minus_volsma,     // volume - SMA(volume, X)
  price_channel_position,  // close position in the X-bar high/low channel, in [-1, 1]
};

std::string_view family_name(FeatureFamily family);
/// Throws ValidationError for unknown names.
FeatureFamily parse_family(std::string_view name);

struct ParamRange {
  int lo = 1;
  int hi = 1;

  bool contains(int v) const noexcept { return v >= lo && v <= hi; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(hi - lo + 1); }
};

/// One indicator with a concrete integer-minute parameter.
struct FeatureSpec {
  FeatureFamily family = FeatureFamily::vwap_minus_sma;
  int param = 2;
  ParamRange range{1, 1 << 20};
  int norm_window = 0;  // 0 selects default_norm_window(param)

  int effective_norm_window() const;
  std::string label() const;  // e.g. "vwap_minus_sma[5]"
};

/// Normalisation window tied to the indicator horizon: 12x param, within [2, 1440].
int default_norm_window(int param);

/// Leading bars for which the raw family value is undefined.
std::size_t raw_warmup(FeatureFamily family, int param);

/// Leading bars masked in a normalised column (raw warm-up plus the sigma window).
std::size_t total_warmup(const FeatureSpec& spec);

/// Throws ValidationError when the parameter is outside its range or a window is too small.
void validate(const FeatureSpec& spec);

/// A feature-space slot: a family and the range its parameter is searched over.
struct FeatureSlot {
  FeatureFamily family = FeatureFamily::vwap_minus_sma;
  ParamRange range;
  int norm_window = 0;
};

using FeatureSpace = std::vector<FeatureSlot>;

/// Largest total warm-up any assignment of the space can require.
std::size_t max_warmup(const FeatureSpace& space);

/// Number of distinct parameter assignments (product of range sizes), saturating.
std::size_t space_cardinality(const FeatureSpace& space);

/// Raw indicator series aligned with `bars`; warm-up entries are NaN.
std::vector<double> raw_feature(std::span<const Bar> bars, const FeatureSpec& spec);

/// (2/pi) * atan(x[i] / sigma[i]) with sigma the trailing sample standard
/// deviation of x over `norm_window` values ending at i. Sigma below 1e-12
/// yields 0. Entries without a full window of finite values are NaN.
std::vector<double> normalize(std::span<const double> series, int norm_window);

/// Normalised features, one row per bar after the shared warm-up.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::vector<FeatureSpec> specs, std::size_t first_bar, std::size_t rows,
                std::vector<double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return specs_.size(); }
  /// Bar index of row 0.
  std::size_t first_bar() const noexcept { return first_bar_; }

  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * cols(), cols()};
  }
  double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  /// Row for bar index `bar`, or nullopt inside the warm-up.
  std::optional<std::span<const double>> row_for_bar(std::size_t bar) const;

  const std::vector<FeatureSpec>& specs() const noexcept { return specs_; }
  std::vector<std::string> column_names() const;
  std::span<const double> values() const noexcept { return values_; }

 private:
  std::vector<FeatureSpec> specs_;
  std::size_t first_bar_ = 0;
  std::size_t rows_ = 0;
  std::vector<double> values_;
};

/// Evaluates `specs` in order. Throws ValidationError for an empty spec list.
/// When the bars are shorter than the warm-up the matrix has zero rows.
FeatureMatrix feature_matrix(std::span<const Bar> bars, std::span<const FeatureSpec> specs);

/// Same, but masks the first `min_first_bar` bars even when the specs need less.
FeatureMatrix feature_matrix(std::span<const Bar> bars, std::span<const FeatureSpec> specs,
                             std::size_t min_first_bar);

/// Writes `open_time,<column>...` for every row.
void write_feature_matrix_csv(const std::filesystem::path& path, std::span<const Bar> bars,
                              const FeatureMatrix& matrix);

}  // namespace labelstrat
